import pytest

from src.errors import (
    ConfigError,
    DomainError,
    FactorizationError,
    FzzLabError,
    NumericalError,
    ParameterError,
    PoleError,
    QuadratureError,
    ReportIOError,
    SimulationError,
    SimulationTimeoutError,
    TooFewSamplesError,
    UnsupportedOrderError,
)


def test_domain_error_names_operation():
    err = DomainError("u0_bar", 0.2, "alpha must exceed gamma/2")
    assert isinstance(err, ParameterError)
    assert str(err).startswith("u0_bar: ")
    assert "alpha must exceed gamma/2" in str(err)
    assert err.value == 0.2


def test_pole_error_message():
    err = PoleError("u_fzz", -1.0 + 1e-12, -1, label="2alpha/gamma-4/gamma^2-1")
    assert err.nearest == -1
    assert "Gamma pole at 2alpha/gamma-4/gamma^2-1" in str(err)


@pytest.mark.parametrize("err,group", [
    (UnsupportedOrderError("truncation_coefficients", 2), ParameterError),
    (ConfigError("bad preset"), ParameterError),
    (QuadratureError("no convergence", {"level": 10}), NumericalError),
    (FactorizationError(600, 1e-3), NumericalError),
    (SimulationTimeoutError("stuck", {"alive": 3}), SimulationError),
    (TooFewSamplesError(12), SimulationError),
    (ReportIOError("/nowhere/x.csv", "denied"), FzzLabError),
])
def test_error_groups(err, group):
    assert isinstance(err, group)
    assert isinstance(err, FzzLabError)
    assert err.format_error() == str(err)


def test_diagnostics_are_kept():
    assert QuadratureError("no convergence", {"level": 10}).diagnostics == {"level": 10}
    assert FactorizationError(600, 1e-3).diagnostics == {"size": 600, "jitter": 1e-3}
    assert SimulationTimeoutError("stuck", {"alive": 3}).diagnostics == {"alive": 3}


def test_plain_message_without_context():
    assert str(FzzLabError("boom")) == "boom"
