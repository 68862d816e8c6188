"""Dynamic correlation analysis: screen gene pairs whose correlation is
driven by latent conditions, extract the latent sample-score components,
and test gene-set enrichment of the associated pairs."""

from .matrix import ExpressionMatrix, filter_genes, knn_impute, load_expression, save_expression, standardize
from .lac import (
    PairList,
    PairScoreTable,
    lac_absolute,
    lac_matrix,
    lac_squared,
    pearson,
    select_top_pairs,
)
from .components import (
    DynamicComponent,
    ProductMatrix,
    build_product_matrix,
    eigendecompose,
    extract_components,
    gram,
    la_score,
    varimax,
)
from .lfdr import FdrModel, fit_null, local_fdr, pair_la_scores, select_pairs_by_fdr
from .enrichment import (
    EnrichmentResult,
    GeneSetCollection,
    between_process,
    binomial_upper_tail,
    load_gene_sets,
    process_pair_network,
    within_process,
)
from .simulate import (
    SimulationConfig,
    gen_correlated_pair,
    gen_dynamic_pair,
    gen_independent_pair,
    gen_planted_dataset,
    lac_distribution_study,
    recovery_score,
    recovery_study,
)

__version__ = "0.1.0"
