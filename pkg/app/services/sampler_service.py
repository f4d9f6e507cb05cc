"""
Stationary samplers.

Exact sampling from Ω when it fits the enumeration budget; otherwise a
long-run Glauber chain from a greedy start, burned in for
``BURN_IN_FACTOR·n·ln n`` updates and thinned by n updates per sample.
"""

from __future__ import annotations

import logging
import math

from app.config import get_settings
from app.services.dynamics_service import ChainState, Coloring, greedy_coloring, run_glauber
from app.services.graph_service import Graph, degeneracy
from app.services.oracle_service import ExactModel, enumerate_colorings, exact_sampler
from app.utils.errors import BudgetExceededError, ColoringError, ColoringLabError
from app.utils.seeding import UniformStream

logger = logging.getLogger(__name__)

PROVENANCE_EXACT = "exact"
PROVENANCE_CHAIN = "glauber"


class ExactSource:
    """Uniform draws from an enumerated Ω."""

    provenance = PROVENANCE_EXACT

    def __init__(self, model: ExactModel) -> None:
        self.model = model

    def __call__(self, stream: UniformStream) -> Coloring:
        return exact_sampler(self.model, stream)


class GlauberSource:
    """Approximately uniform draws from one long Glauber run.

    The chain is burned in on the first call; every call then advances it by
    ``thinning`` updates using the caller's stream.
    """

    provenance = PROVENANCE_CHAIN

    def __init__(
        self,
        graph: Graph,
        k: int,
        burn_in: int | None = None,
        thinning: int | None = None,
    ) -> None:
        degen = degeneracy(graph)
        if k < degen.d + 1:
            raise ColoringError(f"no greedy start: k={k} < d+1={degen.d + 1}")
        n = graph.n
        factor = get_settings().BURN_IN_FACTOR
        self.graph = graph
        self.start = greedy_coloring(graph, list(reversed(degen.order)), range(1, k + 1), k)
        self.burn_in = (
            math.ceil(factor * n * math.log(n)) if n > 1 else 1
        ) if burn_in is None else burn_in
        self.thinning = max(1, n) if thinning is None else thinning
        self._state: ChainState | None = None

    def __call__(self, stream: UniformStream) -> Coloring:
        if self._state is None:
            self._state = ChainState(self.start, stream)
            run_glauber(self._state, self.graph, self.burn_in)
        else:
            self._state.stream = stream
            run_glauber(self._state, self.graph, self.thinning)
        return self._state.coloring


def make_stationary_source(
    graph: Graph,
    k: int,
    budget: int | None = None,
    allow_chain: bool = True,
) -> ExactSource | GlauberSource:
    """Exact source when |Ω| ≤ budget, otherwise a Glauber source.

    Raises:
        ColoringLabError: Ω over budget and ``allow_chain`` is false.
    """
    budget = get_settings().ORACLE_BUDGET if budget is None else budget
    try:
        model = enumerate_colorings(graph, k, budget)
    except BudgetExceededError as exc:
        if not allow_chain:
            raise ColoringLabError(
                f"exact sampler unavailable: {exc}", witness=exc.partial_count
            ) from exc
        logger.warning("Ω over budget %d; falling back to Glauber sampling", budget)
        return GlauberSource(graph, k)
    if model.size == 0:
        raise ColoringError(f"no proper {k}-colouring exists")
    return ExactSource(model)


def chain_certified(graph: Graph, k: int) -> bool:
    """Glauber provably mixes in O(n log n) updates once k > 2Δ."""
    return k > 2 * graph.max_degree


def certified_source(graph: Graph, k: int, budget: int | None = None) -> ExactSource | GlauberSource:
    """Exact source, or a Glauber source only where ``chain_certified`` holds.

    Raises:
        ColoringLabError: Ω over budget and the chain is not certified.
    """
    return make_stationary_source(graph, k, budget, allow_chain=chain_certified(graph, k))


def sample_colorings(
    graph: Graph,
    k: int,
    count: int,
    seed: int,
    source: ExactSource | GlauberSource | None = None,
) -> tuple[list[Coloring], str]:
    """``count`` stationary samples and the provenance of the sampler."""
    source = make_stationary_source(graph, k) if source is None else source
    stream = UniformStream(seed)
    return [source(stream) for _ in range(count)], source.provenance
