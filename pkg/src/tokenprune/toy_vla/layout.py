from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class FeatureLayout:
    """Channel allocation of the hidden dimension.

    Channel 0 is a presence channel that bypasses normalization and carries the
    model's token-type embedding. Channels ``1..head_dim-1`` form the block the
    attention heads read: a bottom-up salience cue, a coarse-semantic block
    (object identity) and a fine-semantic block (object part). The block fits
    inside one head, so every head sees exact feature inner products. After it
    come positional channels, then scratch channels that layer outputs write to.
    """

    hidden_dim: int
    presence: int
    salience: int
    coarse: slice
    fine: slice
    position: slice
    scratch: slice

    @classmethod
    def for_dims(cls, hidden_dim, head_dim):
        if head_dim < 4:
            raise ConfigError(f"head_dim must be >= 4, got {head_dim}")
        if hidden_dim - head_dim < 3:
            raise ConfigError(
                f"hidden_dim ({hidden_dim}) must exceed head_dim ({head_dim}) by >= 3"
            )
        block = head_dim - 2
        n_coarse = max(1, round(block * 5 / 14))
        n_fine = block - n_coarse
        rest = hidden_dim - head_dim
        n_pos = 2 * max(1, rest // 6)
        if rest - n_pos < 1:
            n_pos = 2 * ((rest - 1) // 2)
        c0 = 2
        f0 = c0 + n_coarse
        p0 = f0 + n_fine
        s0 = p0 + n_pos
        return cls(
            hidden_dim=hidden_dim,
            presence=0,
            salience=1,
            coarse=slice(c0, f0),
            fine=slice(f0, p0),
            position=slice(p0, s0),
            scratch=slice(s0, hidden_dim),
        )

    @property
    def attended(self):
        """Channels the query/key projections read (salience, coarse, fine)."""
        return slice(1, self.fine.stop)

    @property
    def n_coarse(self):
        return self.coarse.stop - self.coarse.start

    @property
    def n_fine(self):
        return self.fine.stop - self.fine.start

    @property
    def n_position(self):
        return self.position.stop - self.position.start

    @property
    def n_scratch(self):
        return self.scratch.stop - self.scratch.start
