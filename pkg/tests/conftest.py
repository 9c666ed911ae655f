import math

import pytest

from ranslice.config import NetworkConfig
from ranslice.model import NetworkParams


@pytest.fixture(scope="session")
def umi() -> NetworkConfig:
    """ITU UMi defaults in engineering units."""
    return NetworkConfig()


@pytest.fixture(scope="session")
def params(umi) -> NetworkParams:
    """Linear-unit network constants for the default deployment."""
    return umi.network_params()


@pytest.fixture(scope="session")
def lambda_bs(umi) -> float:
    return umi.lambda_bs


def make_params(gamma_db: float = 0.0, beta: float = 3.5) -> NetworkParams:
    gamma = 10.0 ** (gamma_db / 10.0)
    isd = 200.0
    return NetworkParams(
        lambda_bs=1.0 / (math.pi * isd**2),
        beta=beta,
        kappa=(4.0 * math.pi * 2.1e9 / 3e8) ** 2,
        n0=10.0 ** ((-174.0 - 30.0) / 10.0),
        gamma_i=gamma,
        gamma_a=gamma,
        b_tot=20e6,
        p_tot=10.0 ** ((43.0 - 30.0) / 10.0),
    )
