"""Stateless per-site uniforms.

Every uniform is a pure function of `(seed, sample_idx, i, j)`: the sample
key `mix(mix(seed + G) + sample_idx * G)` and the site key
`mix(i * C ^ mix(j + G))` are combined as `mix(sample_key ^ site_key)`, where
`mix` is the splitmix64 finalizer and G the 64-bit golden ratio. The top 53
bits give a double in [0, 1). Changing any of this changes golden outputs, so
`RNG_VERSION` is written into every result header.
"""
import numpy as np

RNG_VERSION = 'splitmix64-xor-v1'

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SITE_I = np.uint64(0xD1B54A32D192ED03)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TO_UNIT = 2.0**-53


def _as_u64(values):
    # negative indices wrap around (two's complement), deterministically
    return np.atleast_1d(np.asarray(values, dtype=np.int64)).astype(np.uint64)


def _mix(z):
    z = (z ^ (z >> _S30)) * _MIX_1
    z = (z ^ (z >> _S27)) * _MIX_2
    return z ^ (z >> _S31)


def sample_keys(seed, sample_indices):
    with np.errstate(over='ignore'):
        seed_key = _mix(np.atleast_1d(np.uint64(int(seed) % 2**64)) + _GOLDEN)
        return _mix(seed_key + _as_u64(sample_indices) * _GOLDEN)


def site_keys(sites):
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    with np.errstate(over='ignore'):
        return _mix((_as_u64(sites[:, 0]) * _SITE_I)
                    ^ _mix(_as_u64(sites[:, 1]) + _GOLDEN))


def uniforms(sample_key_arr, site_key_arr):
    """Uniforms of shape `(len(sample_key_arr), len(site_key_arr))`."""
    with np.errstate(over='ignore'):
        bits = _mix(sample_key_arr[:, None] ^ site_key_arr[None, :])
    return (bits >> _S11).astype(np.float64) * _TO_UNIT


def site_uniform(seed, sample_idx, site):
    return float(
        uniforms(sample_keys(seed, [sample_idx]), site_keys([site]))[0, 0])
