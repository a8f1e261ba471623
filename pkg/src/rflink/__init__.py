"""rflink: link-level wireless simulation with a bias-tunable RF receive
front-end, system-level metrics and minimum-power tuning."""

from . import channel, errors, framing, io, metrics, modem, rfchain, scenario, tuner, units
from .channel import ChannelProfile, ChannelTap, apply_awgn, apply_channel, apply_multipath, path_loss_db
from .framing import Frame, ParsedFrame, build_frame, crc16, parse_frame, serialize_frame
from .metrics import (
    MetricsReport,
    compute_ber,
    compute_evm,
    compute_mer,
    compute_per,
    compute_ser,
    export_constellation,
    merge_reports,
)
from .modem import (
    BPSK,
    OOK,
    QPSK,
    IqBlock,
    ModulationScheme,
    SymbolRecord,
    demodulate,
    map_bits,
    pulse_shape,
    synchronize,
)
from .rfchain import (
    DEFAULT_LNA_TABLE,
    UNCALIBRATED_LNA_TABLE,
    LnaBiasTable,
    LpfSpec,
    RfBlockParams,
    apply_block,
    apply_lpf,
    apply_mixer,
    calibrate_lna_table,
    cascade_nf_db,
    lna_params,
    measure_iip3,
    nonlinear_coeff,
)
from .scenario import RxSpec, Scenario, WaveformSpec, reference_scenario
from .tuner import TunerPolicy, TunerResult, power_mw, run_trial, select_min_power

__version__ = "0.1.0"

DEFAULT_SCENARIO_FILE = "data/reference.scenario"


def default_scenario_path():
    """Filesystem path of the shipped reference scenario."""
    from importlib.resources import files

    return files(__package__) / DEFAULT_SCENARIO_FILE
