"""Multi-modal survival prediction with missing modalities.

Per-modality encoders map raw features to fixed-width embeddings; a fusion
stage combines whatever subset of modalities a patient has, by
concatenation, mean vector, or tensor product, and scores survival risk
under a Cox partial-likelihood objective with modality dropout and a
masked reconstruction loss.
"""
from .cohort import (Cohort, MissingnessScenario, ModalityId, ModalitySchema,
                     PatientRecord, apply_scenario, complete_subset,
                     generate_synthetic, load_cohort, load_schema, save_cohort,
                     save_schema, scenario_by_name, split)
from .config import TrainConfig
from .errors import ConfigError, DataError, MmsurvError, NumericalError
from .fusion import (DropoutPolicy, FusionModel, FusionStrategy, fuse,
                     init_fusion_model, load_fusion, modality_dropout,
                     model_footprint, recon_loss, save_fusion, total_loss)
from .gradcheck import run_gradient_checks
from .nets import DenseNet, OptimizerState, finite_diff_grad, init_net, load_net, save_net
from .pipeline import (AblationReport, ExperimentCell, SurvivalPredictor,
                       default_synthetic_pair, evaluate, load_predictor,
                       run_ablation_grid, save_predictor, table_cells,
                       train_cell, train_end_to_end, train_fusion_on_table,
                       train_two_stage)
from .survival import SurvivalBatch, concordance_index, cox_loss, cox_loss_grad
from .unimodal import (UnimodalEncoder, export_embeddings, load_unimodal,
                       save_unimodal, train_unimodal)

__version__ = "0.1.0"
