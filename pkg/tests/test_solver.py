import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampedns.errors import BlowUpError, ConfigError, GridMismatchError, InvariantError
from dampedns.forcing import ForceProfile, build_force, lattice_norms
from dampedns.solver import (
    CHECKPOINT_MAGIC,
    InitialCondition,
    IntegratingFactor,
    SimConfig,
    SolverState,
    advective_dt,
    check_invariants,
    checkpoint_bytes,
    gronwall_ceiling,
    linear_symbol,
    load_checkpoint,
    save_checkpoint,
    simulate,
    state_from_bytes,
    step_imex,
    stokes_exact,
    stokes_steady_state,
    trajectory,
    transport_term,
    with_params,
)
from dampedns.spectral import (
    GridSpec,
    SpectralVectorField,
    forward_transform,
    inner_product,
    random_lowpass,
    sobolev_norm,
)

from oracles import transport_by_convolution


@pytest.fixture
def force16(grid16):
    return build_force(ForceProfile("ball_indicator", 4.0, c=1.5), grid16)


def make_config(grid, **kw):
    base = dict(nu=0.5, beta=2.0, grid=grid, dt=0.01, t_end=0.5)
    base.update(kw)
    return SimConfig(**base)


class TestSimConfig:
    def test_rejects_bad_values(self, grid16):
        with pytest.raises(ConfigError, match="dt"):
            make_config(grid16, dt=0.0)
        with pytest.raises(ConfigError, match="nu"):
            make_config(grid16, nu=-1.0)
        with pytest.raises(ConfigError, match="burn_in"):
            make_config(grid16, burn_in=1.0)
        with pytest.raises(ConfigError, match="alpha"):
            make_config(grid16, alpha=4.5)

    def test_with_params(self, grid16):
        cfg = with_params(make_config(grid16), nu=0.25)
        assert cfg.nu == 0.25 and cfg.beta == 2.0

    def test_linear_symbol(self, grid16):
        lam = linear_symbol(grid16, 0.5, 2.0, alpha=2.0, epsilon=0.1)
        np.testing.assert_allclose(lam, 0.5 * grid16.k2 + 2.0 + 0.1 * grid16.k2**2, rtol=1e-15)


class TestTransport:
    def test_matches_convolution(self, grid8):
        u = random_lowpass(grid8, 4, 1.0, 10.0)
        ref = transport_by_convolution(u)
        np.testing.assert_allclose(transport_term(u).coeffs, ref, atol=1e-13 * np.max(np.abs(ref)))

    def test_mollified_matches_convolution(self, grid8):
        u = random_lowpass(grid8, 5, 1.0, 10.0)
        ref = transport_by_convolution(u, 0.4)
        np.testing.assert_allclose(transport_term(u, 0.4).coeffs, ref, atol=1e-13 * np.max(np.abs(ref)))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), delta=st.sampled_from([0.0, 0.2, 0.7]))
    def test_energy_neutral(self, seed, delta):
        g = GridSpec(7.0, 16)
        u = random_lowpass(g, seed, 1.0, 6.0)
        t = transport_term(u, delta)
        assert abs(inner_product(t, u)) <= 1e-12 * sobolev_norm(u, 0) * sobolev_norm(u, 1)

    def test_output_is_solenoidal_and_real(self, field16):
        t = transport_term(field16)
        assert t.divergence_defect() < 1e-13
        assert t.hermitian_defect() < 1e-14

    def test_shear_flow_is_steady(self, grid16):
        # u = (sin(k y), 0, 0) has (u.grad)u = 0
        x = np.arange(16) * grid16.dx
        phys = np.zeros((3,) + grid16.shape)
        phys[0] = np.sin(2 * math.pi / 8.0 * x)[None, :, None]
        u = forward_transform(phys, grid16)
        assert sobolev_norm(transport_term(u), 0) < 1e-14


class TestStepping:
    def test_linear_step_is_exact(self, grid16, force16, field16):
        cfg = make_config(grid16, transport=False)
        state = SolverState(0.0, field16)
        for _ in range(50):
            state = step_imex(state, cfg, force16)
        exact = stokes_exact(field16, force16, cfg.nu, cfg.beta, state.t)
        assert sobolev_norm(state.u - exact, 0) <= 1e-13 * sobolev_norm(exact, 0)

    def test_steady_state_is_fixed_point(self, grid16, force16):
        cfg = make_config(grid16, transport=False)
        u_inf = stokes_steady_state(force16, cfg.nu, cfg.beta)
        after = step_imex(SolverState(0.0, u_inf), cfg, force16)
        assert sobolev_norm(after.u - u_inf, 0) <= 1e-14 * sobolev_norm(u_inf, 0)

    def test_free_decay_rate(self, grid16, field16):
        cfg = make_config(grid16, transport=False)
        zero = SpectralVectorField.zeros(grid16)
        u = stokes_exact(field16, zero, cfg.nu, cfg.beta, 0.3)
        lam = linear_symbol(grid16, cfg.nu, cfg.beta)
        np.testing.assert_allclose(u.coeffs, np.exp(-0.3 * lam) * field16.coeffs, rtol=1e-14, atol=0)

    def test_second_order_convergence(self, grid16, force16, field16):
        cfg = make_config(grid16, t_end=0.2, nu=0.2)
        ref = simulate(with_params(cfg, dt=0.2 / 400), force16, field16).u
        errs = [sobolev_norm(simulate(with_params(cfg, dt=dt), force16, field16).u - ref, 0) for dt in (0.02, 0.01)]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_factor_cache(self, grid16):
        fac = IntegratingFactor(linear_symbol(grid16, 1.0, 1.0))
        a = fac.factors(0.1)
        assert fac.factors(0.1) is a

    def test_hyperviscosity_dissipates_more(self, grid16, field16):
        zero = SpectralVectorField.zeros(grid16)
        plain = simulate(make_config(grid16), zero, field16)
        hyper = simulate(make_config(grid16, epsilon=0.05), zero, field16)
        assert sobolev_norm(hyper.u, 0) < sobolev_norm(plain.u, 0)


class TestTrajectory:
    def test_times_and_count(self, grid16, force16):
        states = list(trajectory(make_config(grid16, dt=0.1, t_end=0.55), force16))
        assert states[0].t == 0.0
        assert [s.step_index for s in states] == list(range(7))
        assert states[-1].t == pytest.approx(0.55, abs=1e-14)

    def test_gronwall_ceiling_holds(self, grid16, force16, field16):
        cfg = make_config(grid16)
        h = lattice_norms(force16, 1.0).h_neg1
        u0 = sobolev_norm(field16, 0)
        for s in trajectory(cfg, force16, field16):
            assert sobolev_norm(s.u, 0) ** 2 <= gronwall_ceiling(u0, h, cfg.nu, cfg.beta, s.t)

    def test_cfl_shrinks_step(self, grid16, force16):
        u0 = random_lowpass(grid16, 1, 5e4, 4.0)
        cfg = make_config(grid16, dt=0.05, t_end=0.05, cfl=0.1)
        states = list(trajectory(cfg, force16, u0))
        assert len(states) > 2
        assert states[1].t == pytest.approx(advective_dt(u0, 0.1))

    def test_blow_up_guard(self, grid16):
        # explicit transport at a huge step with tiny viscosity diverges
        u0 = random_lowpass(grid16, 2, 1e4, 6.0)
        zero = SpectralVectorField.zeros(grid16)
        cfg = make_config(grid16, nu=1e-4, beta=1e-3, dt=0.5, t_end=200.0)
        with pytest.raises(BlowUpError, match="exceeds guard"):
            simulate(cfg, zero, u0)

    def test_grid_mismatch(self, grid16, grid8):
        f = SpectralVectorField.zeros(grid8)
        with pytest.raises(GridMismatchError):
            simulate(make_config(grid16), f)

    def test_invariant_violation_detected(self, grid16):
        bad = grid16.k.astype(complex)
        with pytest.raises(InvariantError, match="divergence"):
            check_invariants(SolverState(0.0, SpectralVectorField(grid16, bad), 100))

    def test_initial_conditions(self, grid16, field16):
        assert sobolev_norm(InitialCondition().build(grid16), 0) == 0
        rnd = InitialCondition("random_lowpass", seed=3, energy=0.5, cutoff=3.0).build(grid16)
        assert sobolev_norm(rnd, 0) ** 2 == pytest.approx(0.5)
        assert InitialCondition("explicit", field=field16).build(grid16) is field16
        with pytest.raises(ConfigError):
            InitialCondition("vortex").build(grid16)


class TestCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path, field16):
        state = SolverState(1.25, field16, 42)
        path = tmp_path / "state.bin"
        save_checkpoint(path, state)
        back = load_checkpoint(path)
        assert back.t == 1.25 and back.step_index == 42 and back.u.grid == field16.grid
        assert back.u.coeffs.tobytes() == field16.coeffs.tobytes()

    def test_layout(self, field16):
        data = checkpoint_bytes(SolverState(0.5, field16, 3))
        assert data[:8] == CHECKPOINT_MAGIC
        assert struct.unpack_from("<I", data, 8)[0] == 1
        L, n, t, step = struct.unpack_from("<dQdQ", data, 16)
        assert (L, n, t, step) == (8.0, 16, 0.5, 3)
        assert len(data) == 16 + 32 + 16**3 * 3 * 16
        # first payload entry is mode (-n/2, -n/2, -n/2), component 0
        first = np.frombuffer(data, dtype="<c16", count=1, offset=48)[0]
        assert first == field16.coeffs[0, 8, 8, 8]

    def test_rejects_corrupt(self, field16):
        data = checkpoint_bytes(SolverState(0.0, field16))
        with pytest.raises(ValueError, match="magic"):
            state_from_bytes(b"XXXXXXXX" + data[8:])
        with pytest.raises(ValueError, match="version"):
            state_from_bytes(data[:8] + struct.pack("<I", 9) + data[12:])
        with pytest.raises(ValueError, match="payload"):
            state_from_bytes(data[:-16])

    def test_resume_continues_identically(self, grid16, force16, field16):
        cfg = make_config(grid16, t_end=0.2)
        states = list(trajectory(cfg, force16, field16))
        mid = state_from_bytes(checkpoint_bytes(states[10]))
        nxt = step_imex(mid, cfg, force16)
        assert np.array_equal(nxt.u.coeffs, states[11].u.coeffs)
