"""Synthetic complex-valued signals and the dataset CSV format.

Class c is a phase-shift-keyed signal whose constellation has c + 2 phases.
Symbols last ``sps`` samples, carry a log-normal amplitude jitter, and the
whole series receives additive circular complex Gaussian noise at the
requested SNR (signal power is ~1).

CSV layout: ``id,label,snr_db,re_0,im_0,...,re_{L-1},im_{L-1}``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..distributions import make_rng
from ..manifold import PolarComplex, arrays_to_cartesian, cartesian_to_arrays, from_arrays

SIGNAL_LENGTH = 128
SNR_GRID = tuple(range(-20, 20, 2))


class DatasetFormatError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    log_r: np.ndarray
    theta: np.ndarray
    label: int
    snr_db: float | None = None

    @property
    def samples(self) -> list[PolarComplex]:
        return from_arrays(self.log_r, self.theta)


@dataclass(eq=False)
class SignalDataset:
    """Column-oriented batch of equal-length signals."""

    log_r: np.ndarray  # (n, L)
    theta: np.ndarray  # (n, L)
    labels: np.ndarray  # (n,) int
    snr_db: np.ndarray  # (n,) float, NaN when untagged
    ids: np.ndarray  # (n,) int
    n_classes: int
    clamped: int = 0

    def __len__(self):
        return self.labels.size

    @property
    def length(self) -> int:
        return self.log_r.shape[1]

    def subset(self, idx) -> SignalDataset:
        idx = np.asarray(idx)
        return SignalDataset(self.log_r[idx], self.theta[idx], self.labels[idx], self.snr_db[idx],
                             self.ids[idx], self.n_classes)

    def signal(self, i: int) -> ComplexSignal:
        snr = None if np.isnan(self.snr_db[i]) else float(self.snr_db[i])
        return ComplexSignal(self.log_r[i], self.theta[i], int(self.labels[i]), snr)

    def rotated(self, phase: float) -> SignalDataset:
        from ..kernels import canonical

        return SignalDataset(self.log_r, canonical(self.theta + phase), self.labels, self.snr_db,
                             self.ids, self.n_classes)

    def split(self, test_frac: float, seed: int) -> tuple[SignalDataset, SignalDataset]:
        """Stratified deterministic train/test split."""
        rng = make_rng(seed)
        train, test = [], []
        for c in range(self.n_classes):
            idx = np.flatnonzero(self.labels == c)
            idx = idx[rng.permutation(idx.size)]
            n_test = int(round(test_frac * idx.size))
            test.extend(idx[:n_test])
            train.extend(idx[n_test:])
        return self.subset(np.sort(train)), self.subset(np.sort(test))


def psk_signal(rng, n_phases: int, snr_db: float, length: int = SIGNAL_LENGTH, sps: int = 8,
               amp_jitter: float = 0.1):
    """One noisy PSK series as complex128."""
    n_sym = -(-length // sps)
    sym = rng.integers(0, n_phases, n_sym)
    phase = (2.0 * sym + 1.0) * math.pi / n_phases
    amp = np.exp(amp_jitter * rng.standard_normal(n_sym))
    x = np.repeat(amp * np.exp(1j * phase), sps)[:length]
    sigma = math.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
    noise = sigma * (rng.standard_normal(length) + 1j * rng.standard_normal(length))
    return x + noise


def generate_psk_dataset(n_classes: int, per_class: int, snr_list, seed: int,
                         length: int = SIGNAL_LENGTH, sps: int = 8,
                         amp_jitter: float = 0.1) -> SignalDataset:
    """``per_class`` signals per class; SNRs are assigned round-robin."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    snr_list = list(snr_list)
    if not snr_list:
        raise ValueError("snr_list is empty")
    rng = make_rng(seed)
    n = n_classes * per_class
    z = np.empty((n, length), dtype=np.complex128)
    labels = np.empty(n, dtype=np.int64)
    snrs = np.empty(n)
    row = 0
    for i in range(per_class):
        for c in range(n_classes):
            snr = float(snr_list[i % len(snr_list)])
            z[row] = psk_signal(rng, c + 2, snr, length, sps, amp_jitter)
            labels[row] = c
            snrs[row] = snr
            row += 1
    log_r, theta, clamped = cartesian_to_arrays(z.real, z.imag)
    return SignalDataset(log_r, theta, labels, snrs, np.arange(n), n_classes, int(clamped.sum()))


def write_dataset_csv(ds: SignalDataset, path) -> None:
    re, im = arrays_to_cartesian(ds.log_r, ds.theta)
    L = ds.length
    header = ["id", "label", "snr_db"] + [f"{a}_{t}" for t in range(L) for a in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            inter = np.empty(2 * L)
            inter[0::2] = re[i]
            inter[1::2] = im[i]
            snr = "" if np.isnan(ds.snr_db[i]) else f"{ds.snr_db[i]:g}"
            w.writerow([int(ds.ids[i]), int(ds.labels[i]), snr] + [f"{x:.17g}" for x in inter])


def read_dataset_csv(path, n_classes: int | None = None) -> SignalDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        if header[:3] != ["id", "label", "snr_db"] or (len(header) - 3) % 2 or len(header) < 5:
            raise DatasetFormatError(f"{path}: bad header")
        width = len(header)
        ids, labels, snrs, vals = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DatasetFormatError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
                snrs.append(float(row[2]) if row[2] != "" else math.nan)
                vals.append([float(x) for x in row[3:]])
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None
    if not labels:
        raise DatasetFormatError(f"{path}: no data rows")
    arr = np.asarray(vals)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise DatasetFormatError(f"{path}: negative label")
    C = int(labels.max()) + 1 if n_classes is None else n_classes
    if labels.max() >= C:
        raise DatasetFormatError(f"{path}: label out of range for {C} classes")
    try:
        log_r, theta, clamped = cartesian_to_arrays(arr[:, 0::2], arr[:, 1::2])
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None
    return SignalDataset(log_r, theta, labels, np.asarray(snrs), np.asarray(ids, dtype=np.int64), C,
                         int(clamped.sum()))
