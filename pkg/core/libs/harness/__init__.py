from core.libs.harness.mongo_logger import MongoLogger
from core.libs.harness.record_codec import (
    FRAMED_SUFFIX,
    HEADER_LENGTH,
    FrameWriter,
    RecordWriter,
    decode_frames,
    dumps,
    encode_frame,
    open_sink,
    read_frames,
    write_summary_csv,
)
from core.libs.harness.experiment_spec import KINDS, ExperimentSpec, load_config
from core.libs.harness.runner import ReplicateRunner, run_guarded
from core.libs.harness.orchestrator import run_experiment
from core.libs.harness.cli import SUBCOMMANDS, main, parse_cli
