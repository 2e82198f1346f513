"""Hidden Markov models with independent per-feature output distributions.

Each state emits every feature independently: categorical outputs for
discrete features, univariate Gaussians for linear features, and von Mises
distributions for angular features.  The module provides exact log-space
forward likelihood, Viterbi decoding, and Baum-Welch (EM) training, plus the
von Mises density and concentration estimator used in the M-step.

The von Mises density is

    p(theta | mu, kappa) = exp(kappa * cos(theta - mu)) / (2 pi I0(kappa))

evaluated through the exponentially scaled Bessel function so it stays
finite for large kappa.  Concentrations are recovered from the mean
resultant length R by inverting A(kappa) = I1(kappa)/I0(kappa), starting
from the closed form kappa ~= R (2 - R^2) / (1 - R^2) and polishing with a
few Newton steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import i0e, i1e, logsumexp

from .errors import ModelError, SchemaMismatchError
from .features import ANGULAR, DISCRETE, LINEAR, FeatureKind, FeatureSeries, Schema

_STOCHASTIC_TOL = 1e-9
_STARVED_MASS = 1e-12


def von_mises_logpdf(theta, mu: float, kappa: float):
    """Log density of the von Mises distribution, stable for any kappa >= 0."""
    if kappa < 0:
        raise ModelError("kappa must be non-negative")
    theta = np.asarray(theta, dtype=float)
    log_norm = math.log(2.0 * math.pi) + math.log(float(i0e(kappa))) + kappa
    return kappa * np.cos(theta - mu) - log_norm


def bessel_ratio(kappa: float) -> float:
    """A(kappa) = I1(kappa) / I0(kappa), the mean resultant length."""
    if kappa == 0.0:
        return 0.0
    return float(i1e(kappa) / i0e(kappa))


def estimate_kappa(r_bar: float, kappa_cap: float = 500.0,
                   newton_steps: int = 5) -> float:
    """Concentration whose mean resultant length matches ``r_bar``.

    Uses the rational approximation refined by Newton iterations on
    A(kappa) - r_bar, where A'(kappa) = 1 - A/kappa - A^2.  Values of r_bar
    at or above 1 saturate at kappa_cap.
    """
    if r_bar < 0:
        raise ModelError("mean resultant length must be >= 0")
    if r_bar >= 1.0:
        return kappa_cap
    if r_bar == 0.0:
        return 0.0
    kappa = r_bar * (2.0 - r_bar ** 2) / (1.0 - r_bar ** 2)
    for _ in range(newton_steps):
        if kappa <= 0 or kappa >= kappa_cap:
            break
        a = bessel_ratio(kappa)
        da = 1.0 - a / kappa - a * a
        if da <= 0:
            break
        step = (a - r_bar) / da
        kappa = kappa - step
    return float(min(max(kappa, 0.0), kappa_cap))


@dataclass
class Categorical:
    probs: np.ndarray

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        symbols = x.astype(int)
        if symbols.min() < 0 or symbols.max() >= len(self.probs):
            raise ModelError("discrete symbol outside the distribution's support")
        with np.errstate(divide="ignore"):
            logp = np.log(self.probs)
        return logp[symbols]


@dataclass
class Gaussian:
    mean: float
    var: float

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        if self.var <= 0:
            raise ModelError("Gaussian variance must be positive")
        return -0.5 * (np.log(2.0 * np.pi * self.var) + (x - self.mean) ** 2 / self.var)


@dataclass
class VonMises:
    mu: float
    kappa: float

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return von_mises_logpdf(x, self.mu, self.kappa)


OutputDist = Categorical | Gaussian | VonMises


@dataclass
class Hmm:
    """An HMM whose per-state outputs mirror a feature schema."""

    schema: Schema
    initial: np.ndarray                      # (S,)
    transitions: np.ndarray                  # (S, S), row stochastic
    outputs: list[list[OutputDist]] = field(default_factory=list)  # [state][feature]

    @property
    def n_states(self) -> int:
        return len(self.initial)

    def validate(self) -> None:
        s = self.n_states
        if self.transitions.shape != (s, s):
            raise ModelError("transition matrix shape mismatch")
        if abs(self.initial.sum() - 1.0) > _STOCHASTIC_TOL:
            raise ModelError("initial distribution must sum to 1")
        if np.any(np.abs(self.transitions.sum(axis=1) - 1.0) > _STOCHASTIC_TOL):
            raise ModelError("transition rows must sum to 1")
        if len(self.outputs) != s or any(len(o) != len(self.schema) for o in self.outputs):
            raise ModelError("outputs must be per-state lists matching the schema")
        for state in self.outputs:
            for (name, kind), dist in zip(self.schema, state):
                ok = (
                    (kind.tag == DISCRETE and isinstance(dist, Categorical))
                    or (kind.tag == LINEAR and isinstance(dist, Gaussian))
                    or (kind.tag == ANGULAR and isinstance(dist, VonMises))
                )
                if not ok:
                    raise ModelError(f"feature {name!r} has a mismatched output kind")


def _emission_log_matrix(hmm: Hmm, series: FeatureSeries) -> np.ndarray:
    """(T, S) per-frame emission log probabilities (sum over features)."""
    if series.schema != hmm.schema:
        raise SchemaMismatchError(
            f"series schema does not match model schema "
            f"({len(series.schema)} vs {len(hmm.schema)} features)"
        )
    t_len = len(series)
    s = hmm.n_states
    logb = np.zeros((t_len, s))

    gauss_cols = [f for f, (_, k) in enumerate(hmm.schema) if k.tag == LINEAR]
    vm_cols = [f for f, (_, k) in enumerate(hmm.schema) if k.tag == ANGULAR]
    cat_cols = [f for f, (_, k) in enumerate(hmm.schema) if k.tag == DISCRETE]

    if gauss_cols:
        x = series.values[:, gauss_cols]                          # (T, G)
        mu = np.array([[hmm.outputs[i][f].mean for f in gauss_cols] for i in range(s)])
        var = np.array([[hmm.outputs[i][f].var for f in gauss_cols] for i in range(s)])
        ll = -0.5 * (np.log(2 * np.pi * var)[None] + (x[:, None, :] - mu[None]) ** 2 / var[None])
        logb += ll.sum(axis=2)
    if vm_cols:
        x = series.values[:, vm_cols]
        mu = np.array([[hmm.outputs[i][f].mu for f in vm_cols] for i in range(s)])
        kap = np.array([[hmm.outputs[i][f].kappa for f in vm_cols] for i in range(s)])
        log_norm = np.log(2 * np.pi) + np.log(i0e(kap)) + kap
        ll = kap[None] * np.cos(x[:, None, :] - mu[None]) - log_norm[None]
        logb += ll.sum(axis=2)
    for f in cat_cols:
        symbols = series.values[:, f].astype(int)
        card = hmm.schema[f][1].cardinality
        if symbols.min() < 0 or symbols.max() >= card:
            raise ModelError(f"symbol out of range for feature {hmm.schema[f][0]!r}")
        probs = np.array([hmm.outputs[i][f].probs for i in range(s)])  # (S, card)
        with np.errstate(divide="ignore"):
            logp = np.log(probs)
        logb += logp[:, symbols].T
    return logb


def log_forward(hmm: Hmm, series: FeatureSeries) -> float:
    """Exact log P(series | hmm) by the log-space forward recursion."""
    logb = _emission_log_matrix(hmm, series)
    with np.errstate(divide="ignore"):
        log_pi = np.log(hmm.initial)
        log_a = np.log(hmm.transitions)
    alpha = log_pi + logb[0]
    for t in range(1, len(logb)):
        alpha = logsumexp(alpha[:, None] + log_a, axis=0) + logb[t]
    return float(logsumexp(alpha))


def viterbi_decode(hmm: Hmm, series: FeatureSeries) -> tuple[np.ndarray, float]:
    """Most probable state path and its joint log probability."""
    logb = _emission_log_matrix(hmm, series)
    with np.errstate(divide="ignore"):
        log_pi = np.log(hmm.initial)
        log_a = np.log(hmm.transitions)
    t_len = len(logb)
    delta = log_pi + logb[0]
    back = np.zeros((t_len, hmm.n_states), dtype=int)
    for t in range(1, t_len):
        trans = delta[:, None] + log_a
        back[t] = np.argmax(trans, axis=0)
        delta = trans[back[t], np.arange(hmm.n_states)] + logb[t]
    path = np.zeros(t_len, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(delta[path[-1]])


@dataclass
class _SeqStats:
    log_likelihood: float
    gamma0: np.ndarray
    xi_sum: np.ndarray
    gamma: np.ndarray  # (T, S)


def _e_step(hmm: Hmm, series: FeatureSeries,
            log_a: np.ndarray, log_pi: np.ndarray) -> _SeqStats:
    logb = _emission_log_matrix(hmm, series)
    t_len, s = logb.shape
    alpha = np.empty((t_len, s))
    alpha[0] = log_pi + logb[0]
    for t in range(1, t_len):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + log_a, axis=0) + logb[t]
    beta = np.zeros((t_len, s))
    for t in range(t_len - 2, -1, -1):
        beta[t] = logsumexp(log_a + (logb[t + 1] + beta[t + 1])[None, :], axis=1)
    ll = float(logsumexp(alpha[-1]))
    if not np.isfinite(ll):
        raise ModelError("training sequence has zero probability under the model")
    gamma = np.exp(alpha + beta - ll)
    if t_len > 1:
        xi = np.exp(
            alpha[:-1, :, None] + log_a[None] +
            (logb[1:] + beta[1:])[:, None, :] - ll
        ).sum(axis=0)
    else:
        xi = np.zeros((s, s))
    return _SeqStats(log_likelihood=ll, gamma0=gamma[0], xi_sum=xi, gamma=gamma)


def _global_outputs(schema: Schema, series_list: list[FeatureSeries],
                    var_floor: float, kappa_cap: float) -> list[OutputDist]:
    """Pooled per-feature output distributions, used to reset starved states."""
    stacked = np.vstack([s.values for s in series_list])
    dists: list[OutputDist] = []
    for f, (_, kind) in enumerate(schema):
        col = stacked[:, f]
        if kind.tag == LINEAR:
            dists.append(Gaussian(float(col.mean()), max(float(col.var()), var_floor)))
        elif kind.tag == ANGULAR:
            c, s_ = float(np.cos(col).mean()), float(np.sin(col).mean())
            r = math.hypot(c, s_)
            dists.append(VonMises(math.atan2(s_, c), estimate_kappa(min(r, 1.0 - 1e-12), kappa_cap)))
        else:
            probs = np.full(kind.cardinality, 1.0 / kind.cardinality)
            dists.append(Categorical(probs))
    return dists


def baum_welch(hmm: Hmm, series_list: list[FeatureSeries], max_iters: int = 30,
               tol: float = 1e-3, var_floor: float = 1e-4,
               kappa_cap: float = 500.0,
               pseudo_count: float = 0.01) -> tuple[Hmm, list[float]]:
    """EM training; returns the trained model and the per-iteration total
    log-likelihood history (non-decreasing; a decreasing step is rejected
    and training stops at the previous parameters).
    """
    if not series_list:
        raise ModelError("training needs at least one sequence")
    for series in series_list:
        if series.schema != hmm.schema:
            raise SchemaMismatchError("training sequence schema does not match the model")
    hmm.validate()
    hmm = replace(hmm, initial=hmm.initial.copy(),
                  transitions=hmm.transitions.copy(),
                  outputs=[list(row) for row in hmm.outputs])
    s = hmm.n_states
    global_dists = _global_outputs(hmm.schema, series_list, var_floor, kappa_cap)
    history: list[float] = []
    prev_params = None

    for _ in range(max_iters):
        with np.errstate(divide="ignore"):
            log_a = np.log(hmm.transitions)
            log_pi = np.log(hmm.initial)
        stats = [_e_step(hmm, series, log_a, log_pi) for series in series_list]
        total_ll = sum(st.log_likelihood for st in stats)
        if history:
            delta = total_ll - history[-1]
            if delta < -1e-9 and prev_params is not None:
                # the smoothed M-step stepped downhill: keep the previous model
                hmm.initial, hmm.transitions, hmm.outputs = prev_params
                break
            history.append(total_ll)
            if delta < tol:
                break
        else:
            history.append(total_ll)
        prev_params = (hmm.initial.copy(), hmm.transitions.copy(),
                       [list(row) for row in hmm.outputs])

        pi = np.zeros(s)
        xi = np.zeros((s, s))
        occupancy = np.zeros(s)
        for st in stats:
            pi += st.gamma0
            xi += st.xi_sum
            occupancy += st.gamma.sum(axis=0)
        hmm.initial = pi / pi.sum()
        denom = xi.sum(axis=1)
        new_a = np.empty_like(xi)
        for i in range(s):
            if denom[i] > _STARVED_MASS:
                new_a[i] = xi[i] / denom[i]
            else:
                new_a[i] = hmm.transitions[i]
        hmm.transitions = new_a

        for f, (_, kind) in enumerate(hmm.schema):
            cols = [series.values[:, f] for series in series_list]
            for i in range(s):
                weights = [st.gamma[:, i] for st in stats]
                w_total = occupancy[i]
                if w_total <= _STARVED_MASS:
                    hmm.outputs[i][f] = global_dists[f]
                    continue
                if kind.tag == LINEAR:
                    sx = sum(float(w @ x) for w, x in zip(weights, cols))
                    sxx = sum(float(w @ (x * x)) for w, x in zip(weights, cols))
                    mean = sx / w_total
                    var = max(sxx / w_total - mean * mean, var_floor)
                    hmm.outputs[i][f] = Gaussian(mean, var)
                elif kind.tag == ANGULAR:
                    c = sum(float(w @ np.cos(x)) for w, x in zip(weights, cols))
                    s_ = sum(float(w @ np.sin(x)) for w, x in zip(weights, cols))
                    r_bar = min(math.hypot(c, s_) / w_total, 1.0)
                    hmm.outputs[i][f] = VonMises(
                        float((math.atan2(s_, c) + math.pi) % (2 * math.pi) - math.pi),
                        estimate_kappa(r_bar, kappa_cap),
                    )
                else:
                    counts = np.full(kind.cardinality, pseudo_count)
                    for w, x in zip(weights, cols):
                        np.add.at(counts, x.astype(int), w)
                    hmm.outputs[i][f] = Categorical(counts / counts.sum())

    hmm.validate()
    return hmm, history


def init_left_right(schema: Schema, n_states: int,
                    series_list: list[FeatureSeries], seed: int = 0,
                    var_floor: float = 1e-4, kappa_cap: float = 500.0,
                    pseudo_count: float = 0.01) -> Hmm:
    """Left-to-right initialization with self loops and light smoothing.

    Output distributions come from segmenting every sequence into n_states
    contiguous chunks; Gaussian means get a small seeded jitter to break
    symmetry between states.
    """
    if not series_list:
        raise ModelError("initialization needs at least one sequence")
    rng = np.random.default_rng(seed)
    initial = np.full(n_states, 0.01)
    initial[0] = 1.0
    initial /= initial.sum()
    trans = np.full((n_states, n_states), 0.01 / n_states)
    for i in range(n_states):
        trans[i, i] += 0.7
        trans[i, min(i + 1, n_states - 1)] += 0.3
    trans /= trans.sum(axis=1, keepdims=True)

    chunks: list[list[np.ndarray]] = [[] for _ in range(n_states)]
    for series in series_list:
        for i, part in enumerate(np.array_split(series.values, n_states)):
            if len(part):
                chunks[i].append(part)
    pooled_all = np.vstack([s.values for s in series_list])

    outputs: list[list[OutputDist]] = []
    for i in range(n_states):
        data = np.vstack(chunks[i]) if chunks[i] else pooled_all
        row: list[OutputDist] = []
        for f, (_, kind) in enumerate(schema):
            col = data[:, f]
            if kind.tag == LINEAR:
                scale = float(pooled_all[:, f].std()) or 1.0
                mean = float(col.mean()) + rng.normal(0.0, 0.01 * scale)
                row.append(Gaussian(mean, max(float(col.var()), var_floor)))
            elif kind.tag == ANGULAR:
                c, s_ = float(np.cos(col).mean()), float(np.sin(col).mean())
                r = min(math.hypot(c, s_), 1.0 - 1e-9)
                row.append(VonMises(math.atan2(s_, c), estimate_kappa(r, kappa_cap)))
            else:
                counts = np.full(kind.cardinality, pseudo_count)
                np.add.at(counts, col.astype(int), 1.0)
                row.append(Categorical(counts / counts.sum()))
        outputs.append(row)
    model = Hmm(schema=tuple(schema), initial=initial, transitions=trans, outputs=outputs)
    model.validate()
    return model


# --- model file format (versioned text, exact decimal round trip) ---------

def _fmt(x: float) -> str:
    return repr(float(x))


def render_hmm(hmm: Hmm) -> str:
    lines = ["hmm v1", f"states {hmm.n_states}", f"features {len(hmm.schema)}"]
    for f, (name, kind) in enumerate(hmm.schema):
        if kind.tag == DISCRETE:
            lines.append(f"feature {f} {name} {kind.tag} {kind.cardinality}")
        else:
            lines.append(f"feature {f} {name} {kind.tag}")
    lines.append("initial " + " ".join(_fmt(v) for v in hmm.initial))
    for row in hmm.transitions:
        lines.append("trans " + " ".join(_fmt(v) for v in row))
    for i, state_row in enumerate(hmm.outputs):
        for f, dist in enumerate(state_row):
            if isinstance(dist, Gaussian):
                lines.append(f"out {i} {f} gaussian {_fmt(dist.mean)} {_fmt(dist.var)}")
            elif isinstance(dist, VonMises):
                lines.append(f"out {i} {f} vonmises {_fmt(dist.mu)} {_fmt(dist.kappa)}")
            else:
                lines.append(f"out {i} {f} categorical "
                             + " ".join(_fmt(p) for p in dist.probs))
    return "\n".join(lines) + "\n"


def parse_hmm(text: str) -> Hmm:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "hmm v1":
        raise ModelError("unsupported model file version")
    n_states = int(lines[1].split()[1])
    n_features = int(lines[2].split()[1])
    schema: list[tuple[str, FeatureKind]] = [("", FeatureKind(LINEAR))] * n_features
    initial = None
    trans_rows: list[np.ndarray] = []
    outputs: list[list[OutputDist | None]] = [
        [None] * n_features for _ in range(n_states)
    ]
    for line in lines[3:]:
        toks = line.split()
        if toks[0] == "feature":
            f, name, tag = int(toks[1]), toks[2], toks[3]
            card = int(toks[4]) if tag == DISCRETE else None
            schema[f] = (name, FeatureKind(tag, card))
        elif toks[0] == "initial":
            initial = np.array([float(v) for v in toks[1:]])
        elif toks[0] == "trans":
            trans_rows.append(np.array([float(v) for v in toks[1:]]))
        elif toks[0] == "out":
            i, f, kind = int(toks[1]), int(toks[2]), toks[3]
            params = [float(v) for v in toks[4:]]
            if kind == "gaussian":
                outputs[i][f] = Gaussian(params[0], params[1])
            elif kind == "vonmises":
                outputs[i][f] = VonMises(params[0], params[1])
            elif kind == "categorical":
                outputs[i][f] = Categorical(np.array(params))
            else:
                raise ModelError(f"unknown output kind {kind!r}")
        else:
            raise ModelError(f"unknown model line: {line!r}")
    if initial is None or len(trans_rows) != n_states:
        raise ModelError("model file is missing initial or transition rows")
    if any(dist is None for row in outputs for dist in row):
        raise ModelError("model file is missing output distributions")
    model = Hmm(schema=tuple(schema), initial=initial,
                transitions=np.vstack(trans_rows), outputs=outputs)  # type: ignore[arg-type]
    model.validate()
    return model
