"""Power/voltage conversions and physical constants.

Complex-envelope samples throughout the package are RMS-referred volts
across R_REF: a block x carries power mean(|x|^2) / R_REF watts.
"""

import numpy as np

R_REF = 50.0                 # reference impedance, ohms
KT_290 = 4.0039e-21          # thermal noise density at 290 K, W/Hz
SPEED_OF_LIGHT = 2.99792458e8  # m/s


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * np.log10(p_w) + 30.0


def dbm_to_vrms(p_dbm: float, r_ohm: float = R_REF) -> float:
    """RMS envelope voltage of a signal with the given power."""
    return float(np.sqrt(dbm_to_watts(p_dbm) * r_ohm))


def vrms_to_dbm(v_rms: float, r_ohm: float = R_REF) -> float:
    return watts_to_dbm(v_rms**2 / r_ohm)


def db_to_linear(x_db: float) -> float:
    """Power ratio from dB."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * np.log10(x)


def db_to_amplitude(x_db: float) -> float:
    """Voltage ratio from dB."""
    return 10.0 ** (x_db / 20.0)


def block_power_w(samples: np.ndarray, r_ohm: float = R_REF) -> float:
    """Mean envelope power of a sample array in watts."""
    return float(np.mean(np.abs(samples) ** 2)) / r_ohm


def block_power_dbm(samples: np.ndarray, r_ohm: float = R_REF) -> float:
    return watts_to_dbm(block_power_w(samples, r_ohm))
