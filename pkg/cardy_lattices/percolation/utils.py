import math

from scipy import stats


def wilson_interval(successes, n, confidence=.95):
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        return 0., 1.
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    p_hat = successes / n
    denominator = 1 + z**2 / n
    center = (p_hat + z**2 / (2 * n)) / denominator
    margin = z / denominator * math.sqrt(p_hat * (1 - p_hat) / n +
                                         z**2 / (4 * n**2))
    # clip to [0, 1] and make sure rounding never leaves p_hat outside
    return (min(max(0., center - margin), p_hat),
            max(min(1., center + margin), p_hat))


def split_blocks(n, block_size):
    return [(start, min(start + block_size, n))
            for start in range(0, n, block_size)]
