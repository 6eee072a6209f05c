"""Hypothesis strategies for random models with a quasi-stationary regime."""
from hypothesis import strategies as st

from levyqsd import BMDrift, CPExpDrift, Meromorphic

pos = lambda lo, hi: st.floats(lo, hi, allow_nan=False, allow_infinity=False)


@st.composite
def bm_models(draw):
    return BMDrift(draw(pos(0.05, 5.0)), draw(pos(0.2, 3.0)))


@st.composite
def cp_models(draw):
    rho = draw(pos(0.2, 5.0))
    c = draw(pos(0.05, 5.0))
    # keep psi'(0) = mu - c/rho clearly positive
    mu = c / rho * draw(pos(1.2, 6.0))
    return CPExpDrift(mu, c, rho)


@st.composite
def mero_models(draw):
    n = draw(st.integers(1, 4))
    rho, acc = [], 0.0
    for _ in range(n):
        acc += draw(pos(0.3, 2.0))
        rho.append(acc)
    weights = [draw(pos(0.1, 5.0)) for _ in range(n)]
    sigma = draw(st.sampled_from([0.0, 0.3, 1.0]))
    m = Meromorphic(0.0, sigma, tuple(zip(weights, rho)))
    # choose a so that psi'(0) lands in [0.2, 2]
    target = draw(pos(0.2, 2.0))
    can = m.canonical
    drift0 = can.drift + 0.0
    slope0 = drift0 - float(sum(can.rates / can.sizes))
    return Meromorphic(slope0 - target, sigma, m.atoms)


any_model = st.one_of(bm_models(), cp_models(), mero_models())
