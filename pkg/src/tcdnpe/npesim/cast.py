"""Local distribution network: which batch and neuron slot each PE serves."""

from dataclasses import dataclass

from ..mapper import enumerate_configs


@dataclass(frozen=True)
class CastPattern:
    """Feature and weight routing for one NPE(K, N) configuration.

    ``feature_source[t]`` is the batch slot broadcast to TG ``t``;
    ``weight_slot[t][c]`` is the neuron slot whose weight is unicast to PE
    ``(t, c)``.
    """

    config: object
    rows: int
    cols: int
    feature_source: tuple
    weight_slot: tuple

    def broadcast_groups(self):
        """TGs sharing each batch slot's feature word."""
        groups = {}
        for t, k in enumerate(self.feature_source):
            groups.setdefault(k, []).append(t)
        return groups

    def active_pes(self, load):
        """PEs that are clocked for a ``(K*, N*)`` load, in PE order.

        Yields ``(tg, col, batch_slot, neuron_slot)``; the rest are gated off.
        """
        k_load, n_load = load
        for t in range(self.rows):
            k = self.feature_source[t]
            if k >= k_load:
                continue
            for c in range(self.cols):
                j = self.weight_slot[t][c]
                if j < n_load:
                    yield t, c, k, j


def make_cast_pattern(config, shape):
    """Routing for ``config`` on ``shape``: ``rows / K`` consecutive TGs per batch slot."""
    if config not in enumerate_configs(shape):
        raise ValueError(f"NPE({config.K},{config.N}) is not legal on a {shape.rows}x{shape.cols} array")
    tgs_per_batch = shape.rows // config.K
    source = tuple(t // tgs_per_batch for t in range(shape.rows))
    slots = tuple(tuple((t % tgs_per_batch) * shape.cols + c for c in range(shape.cols))
                  for t in range(shape.rows))
    return CastPattern(config, shape.rows, shape.cols, source, slots)
