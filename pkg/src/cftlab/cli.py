"""Command line interface: ``cftlab verify``, ``specfun``, ``transform``, ``correlator``,
``hamiltonian``, ``spectrum``, ``pde`` and ``fermion``.

Every subcommand reads model parameters from ``--config`` (INI, ``[model]``
section) with per-key overrides such as ``--ell`` or ``--n-max``.  Tabular
output is CSV with 17 significant digits, written to stdout unless
``--csv-dir`` is given.
"""
from __future__ import annotations

import csv
import io
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import fermion, hamiltonians as ham, harness, ncilw, specfun, transforms, vertex
from .fock import FockBasis
from .params import load_config

FMT = harness.FMT

MODEL_KEYS = ("ell", "delta", "r0", "s0", "nu_sign", "eps", "n_max", "l_max", "mu_max")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FMT.format(float(v))
    return str(v)


class Output:
    """CSV sink: stdout, or ``<csv_dir>/<name>.csv``."""

    def __init__(self, csv_dir=None):
        self.csv_dir = Path(csv_dir) if csv_dir else None

    def table(self, name, header, rows):
        if self.csv_dir is None:
            fh = io.StringIO()
        else:
            self.csv_dir.mkdir(parents=True, exist_ok=True)
            fh = open(self.csv_dir / f"{name}.csv", "w", newline="")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        if self.csv_dir is None:
            click.echo(fh.getvalue(), nl=False)
        else:
            fh.close()
            click.echo(f"wrote {self.csv_dir / (name + '.csv')}", err=True)


class State:
    def __init__(self, params, cfg, seed, json_path, csv_dir, only, tolerance_scale):
        self.params, self.cfg, self.seed = params, cfg, seed
        self.json_path, self.only, self.tolerance_scale = json_path, only, tolerance_scale
        self.out = Output(csv_dir)


pass_state = click.make_pass_decorator(State)


def _model_options(fn):
    for key in reversed(MODEL_KEYS):
        typ = int if key in ("r0", "s0", "nu_sign", "n_max", "l_max", "mu_max") else float
        fn = click.option(f"--{key.replace('_', '-')}", key, type=typ, default=None,
                          help=f"override model key {key}")(fn)
    return fn


@click.group()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="INI file with a [model] section")
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None,
              help="write the verification report as JSON")
@click.option("--csv-dir", type=click.Path(file_okay=False), default=None,
              help="write CSV tables into this directory instead of stdout")
@click.option("--only", default=None, help="comma-separated check ids or prefixes")
@click.option("--tolerance-scale", type=float, default=1.0, show_default=True)
@_model_options
@click.pass_context
def main(ctx, config, seed, json_path, csv_dir, only, tolerance_scale, **overrides):
    """Regularized anyons, eCS and ncILW Hamiltonians on a truncated Fock space."""
    params, cfg = load_config(config, overrides)
    ctx.obj = State(params, cfg, seed, json_path, csv_dir, only, tolerance_scale)


@main.command()
@pass_state
def verify(st: State):
    """Run the verification suites; exit status 1 if any check fails."""
    hctx = harness.Context(st.params, st.seed, st.tolerance_scale)
    report = harness.run_all(hctx, st.only, echo=click.echo)
    summ = report.summary()
    click.echo(" ".join(f"{k}={v}" for k, v in sorted(summ["counts"].items())))
    if st.json_path:
        report.write_json(st.json_path)
    if st.out.csv_dir is not None:
        report.write_csv(st.out.csv_dir)
    sys.exit(0 if report.ok else 1)


# ----------------------------------------------------------------------------

SPECFUN = {
    "theta1": lambda x, eps, p, path: specfun.theta_reg(1, p.kappa * x, p.q, p.kappa * eps, path or "product"),
    "theta4": lambda x, eps, p, path: specfun.theta_reg(4, p.kappa * x, p.q, p.kappa * eps, path or "product"),
    "zeta1": lambda x, eps, p, path: specfun.zeta1(x, p, path or "series"),
    "wp1": lambda x, eps, p, path: specfun.wp1_reg(x, eps, False, p, path or "analytic"),
    "wp1_shifted": lambda x, eps, p, path: specfun.wp1_reg(x, eps, True, p, path or "analytic"),
    "sgn": lambda x, eps, p, path: specfun.sgn_reg(x, eps, p, path or "log"),
    "delta": lambda x, eps, p, path: specfun.dirac_reg(x, eps, p, path or "closed"),
    "C": lambda x, eps, p, path: specfun.C_fun(x, eps, p, path or "series"),
}


@main.group(name="specfun")
def specfun_group():
    """Special functions."""


@specfun_group.command("eval")
@click.option("--fn", "name", type=click.Choice(sorted(SPECFUN)), required=True)
@click.option("--x", "xs", type=float, multiple=True, required=True, help="evaluation point (repeatable)")
@click.option("--eps", type=float, default=None, help="regularization (default: model eps)")
@click.option("--path", default=None, help="evaluation route, e.g. product/log, series/lattice")
@pass_state
def specfun_eval(st: State, name, xs, eps, path):
    """Evaluate a special function; CSV rows (x, Re, Im, path, trunc)."""
    p = st.params
    eps = p.eps if eps is None else eps
    vals = np.asarray(SPECFUN[name](np.asarray(xs, float), eps, p, path), dtype=complex)
    rows = [(x, v.real, v.imag, path or "default", f"q={p.q:.6g}") for x, v in zip(xs, np.atleast_1d(vals))]
    st.out.table(f"specfun_{name}", ["x", "re", "im", "path", "trunc"], rows)


@main.command()
@click.option("--op", type=click.Choice(["T", "Tt"]), required=True)
@click.option("--input", "path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV with one column of equispaced samples on [-ell, ell)")
@pass_state
def transform(st: State, op, path):
    """Apply T or T~ to sampled data; CSV of samples and modes."""
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    f = data[:, -1]
    p = st.params
    out = transforms.apply_T(f, p) if op == "T" else transforms.apply_Tt(f, p)
    x = transforms.grid(len(f), p.ell)
    st.out.table(f"transform_{op}", ["x", "f", "out"], zip(x, f, out))
    fh = transforms.to_modes(out)
    n = transforms.mode_numbers(len(f))
    st.out.table(f"transform_{op}_modes", ["n", "re", "im"], zip(n, fh.real, fh.imag))


def parse_insertions(spec: str, eps: float):
    """``"+:1:0.3,-:-1:-0.2"`` -> insertions ``(r, charge, x)``; charges are multiples of ``nu0``."""
    out = []
    for item in spec.split(","):
        parts = item.strip().split(":")
        if len(parts) not in (3, 4):
            raise click.BadParameter(f"bad insertion {item!r}; expected r:charge:x[:eps]")
        r = {"+": 1, "-": -1, "1": 1, "-1": -1}[parts[0]]
        out.append((r, int(parts[1]), float(parts[2]), float(parts[3]) if len(parts) == 4 else eps))
    return out


@main.command()
@click.option("--insertions", required=True, help="r:charge:x[:eps] items separated by commas")
@click.option("--shift", "shifts", type=float, multiple=True,
              help="x offsets applied to the first insertion (repeatable; default 0)")
@pass_state
def correlator(st: State, insertions, shifts):
    """Closed-form and Fock-space anyon correlators; CSV (x, closed, fock, abs diff)."""
    p = st.params
    items = parse_insertions(insertions, p.eps)
    basis = FockBasis(p.trunc)
    rows = []
    for dx in shifts or (0.0,):
        ins = [vertex.Insertion(r, k * p.nu0, x + (dx if i == 0 else 0.0), e)
               for i, (r, k, x, e) in enumerate(items)]
        c = vertex.correlator_closed(ins, p)
        f = vertex.correlator_fock(ins, basis, p)
        rows.append((ins[0].x, c.real, c.imag, f.real, f.imag, abs(c - f)))
    st.out.table("correlator", ["x", "closed_re", "closed_im", "fock_re", "fock_im", "abs_diff"], rows)


OPERATORS = {
    "W1": lambda b, p, r: ham.build_W(1, r, b, p),
    "W2": lambda b, p, r: ham.build_W(2, r, b, p),
    "W3": lambda b, p, r: ham.build_W(3, r, b, p),
    "C": lambda b, p, r: ham.build_C(b, p),
    "H2": lambda b, p, r: ham.build_H2(b, p),
    "H3": lambda b, p, r: ham.build_H3(b, p),
}


def _sign(s: str) -> int:
    return {"+": 1, "-": -1}[s]


@main.group()
def hamiltonian():
    """Hamiltonian operators on the truncated Fock space."""


@hamiltonian.command("build")
@click.option("--kind", type=click.Choice(sorted(OPERATORS)), required=True)
@click.option("--r", "r", type=click.Choice(["+", "-"]), default="+")
@pass_state
def hamiltonian_build(st: State, kind, r):
    """Per-sector dimension, Hermiticity residual and lowest eigenvalue."""
    p = st.params
    b = FockBasis(p.trunc)
    op = OPERATORS[kind](b, p, _sign(r))
    rows = []
    for mu in b.charges:
        m = ham.sector_matrix(op, mu).toarray()
        herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        low = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]) if m.size else math.nan
        rows.append((f"{mu[0]}:{mu[1]}", m.shape[0], herm, low))
    st.out.table(f"hamiltonian_{kind}", ["sector", "dim", "hermiticity_residual", "lowest_eigenvalue"], rows)


def spectrum_rows(op, basis, tol=1e-9):
    """Eigenvalues with multiplicities, clustered at ``tol`` relative spacing, per sector."""
    rows = []
    for mu in basis.charges:
        m = ham.sector_matrix(op, mu).toarray()
        if not m.size:
            continue
        ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        start = 0
        for i in range(1, len(ev) + 1):
            if i == len(ev) or ev[i] - ev[start] > tol * max(1.0, abs(ev[start])):
                rows.append((f"{mu[0]}:{mu[1]}", float(np.mean(ev[start:i])), i - start))
                start = i
    return rows


@main.command()
@click.option("--op", "kind", type=click.Choice(sorted(OPERATORS)), required=True)
@click.option("--r", "r", type=click.Choice(["+", "-"]), default="+")
@pass_state
def spectrum(st: State, kind, r):
    """Eigenvalues with multiplicities as CSV (sector, eigenvalue, multiplicity)."""
    p = st.params
    b = FockBasis(p.trunc)
    st.out.table(f"spectrum_{kind}", ["sector", "eigenvalue", "multiplicity"],
                 spectrum_rows(OPERATORS[kind](b, p, _sign(r)), b))


@main.group()
def pde():
    """Classical ncILW system."""


@pde.command("run")
@click.option("--g", type=float, default=2.0, show_default=True)
@click.option("--delta", "delta_", type=float, default=None, help="overrides the model delta")
@click.option("--N", "n_grid", type=int, default=256, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--T", "T", type=float, default=1.0, show_default=True)
@click.option("--ic", default="waves", show_default=True,
              help="preset name or a CSV file with columns u, v")
@click.option("--amplitude", type=float, default=1.0, show_default=True)
@click.option("--scheme", type=click.Choice(["RK4", "IMEX"]), default="RK4", show_default=True)
@click.option("--log-every", type=int, default=10, show_default=True)
@click.option("--snapshot-every", type=int, default=0,
              help="steps between field snapshots (needs --csv-dir; 0 writes only the final state)")
@pass_state
def pde_run(st: State, g, delta_, n_grid, dt, T, ic, amplitude, scheme, log_every, snapshot_every):
    """Integrate and emit a CSV time series of the conserved quantities."""
    p = st.params if delta_ is None else st.params.with_(delta=delta_)
    if Path(ic).is_file():
        data = np.loadtxt(ic, delimiter=",", ndmin=2, comments="#")
        state = ncilw.FieldPair(data[:, 0], data[:, 1])
    else:
        state = ncilw.preset_initial(ic, n_grid, p.ell, amplitude)
    n_steps = int(round(T / dt))
    chunk = snapshot_every if snapshot_every > 0 else n_steps
    keys = ["mass_u", "mass_v", "momentum", "hamiltonian"]
    times, log, snaps = [], {k: [] for k in keys}, [state]
    done = 0
    while done < n_steps:
        n = min(chunk, n_steps - done)
        try:
            tr = ncilw.integrate(snaps[-1], dt, n, p, scheme, g, min(log_every, n))
        except (ValueError, ncilw.BlowUpError) as exc:
            raise click.ClickException(f"{exc} (reduce --dt or use --scheme IMEX)")
        skip = 0 if done == 0 else 1
        times += tr.times[skip:]
        for k in keys:
            log[k] += tr.log[k][skip:]
        snaps.append(tr.state)
        done += n
    st.out.table("pde_series", ["t"] + keys, zip(times, *[log[k] for k in keys]))
    if st.out.csv_dir is not None:
        x = transforms.grid(state.n_grid, p.ell)
        for i, s in enumerate(snaps):
            st.out.table(f"pde_snapshot_{i:04d}", ["x", "u", "v"], zip(x, s.u, s.v))
    for k in keys:
        vals = np.asarray(log[k])
        click.echo(f"drift {k} = {np.max(np.abs(vals - vals[0])):.3e}", err=True)


@main.group(name="fermion")
def fermion_group():
    """Fermion side of the bosonization at q = 0."""


@fermion_group.command("bosonize-check")
@click.option("--q", "q", type=float, default=0.0, show_default=True,
              help="nome; only q = 0 is supported by the H_2 comparison")
@click.option("--level", type=int, default=6, show_default=True)
@click.option("--mu-max-sectors", type=int, default=1, show_default=True)
@pass_state
def bosonize_check(st: State, q, level, mu_max_sectors):
    """Per-sector comparison of fermion and boson H_2 spectra."""
    p = st.params
    p = p.with_(delta=math.inf if q == 0 else -math.log(q) / (2 * p.kappa))
    try:
        cmp_ = fermion.compare_h2_spectra(p, level, mu_max_sectors)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    rows = [(f"{mp}:{mm}", L, nb, nf, d) for (mp, mm, L), (nb, nf, d) in sorted(cmp_.sectors.items())]
    st.out.table("bosonize_check", ["sector", "level", "dim_boson", "dim_fermion", "max_abs_diff"], rows)
    click.echo(f"dims_match={cmp_.dims_match} max_abs_diff={cmp_.max_abs_diff:.3e}", err=True)
    sys.exit(0 if cmp_.passed else 1)


if __name__ == "__main__":
    main()
