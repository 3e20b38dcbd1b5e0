"""Interactive 3D mesh segmentation from simulated 2D supervision.

A per-vertex feature field is distilled from a view-based teacher, then a
click-conditioned attention decoder turns user clicks into a per-vertex
probability field. Everything runs on numpy with hand-rolled gradients.
"""

from .checkpoint import (Checkpoint, CheckpointError, STAGE_DECODER, STAGE_ENCODER,
                         STAGE_JOINT, load_checkpoint, save_checkpoint)
from .config import ConfigError, load_config, save_config
from .decoder import (DecoderConfig, ProbabilityField, decode, init_decoder_params,
                      interactive_attention, segment)
from .encoder import (EncoderConfig, MeshFeatureField, encoder_forward, encoder_loss,
                      init_encoder_params, positional_encode)
from .evaluation import (binarize, consistency_check, consistency_check_images,
                         cross_domain_segment, fusion_baseline, iou, otsu_threshold,
                         stability_eval)
from .geometry import (Click, ClickSet, Mesh, MeshError, NEGATIVE, POSITIVE,
                       export_selection, load_obj, one_ring_neighbors,
                       sample_training_vertices, save_obj)
from .model import Model, ModelError
from .numerics import NumericError, ParamStore, adam_step
from .rasterizer import (Camera, RasterOutput, ViewPolicy, ViewSampler, project_click,
                         project_vertices, rasterize, read_mffi, read_pgm, read_png,
                         render_color, shade_attributes, shade_backward,
                         visible_vertices, write_mffi, write_pgm, write_png)
from .service import MeshSegService, RequestError, make_server, serve_forever
from .teacher import (FileTeacher, PromptPixel, SyntheticTeacher, TeacherError,
                      TeacherSample, load_dataset, save_dataset, validate_dataset)
from .training import (ClickRecord, TrainConfig, distill_encoder, evaluate_click_iou,
                       generate_click_dataset, load_click_dataset, save_click_dataset,
                       train_decoder, train_joint_ablation)

__version__ = "0.1.0"

__all__ = [
    "Camera", "Checkpoint", "CheckpointError", "Click", "ClickRecord", "ClickSet",
    "ConfigError", "DecoderConfig", "EncoderConfig", "FileTeacher", "Mesh",
    "MeshError", "MeshFeatureField", "MeshSegService", "Model", "ModelError",
    "NEGATIVE", "NumericError", "POSITIVE", "ParamStore", "ProbabilityField",
    "PromptPixel", "RasterOutput", "RequestError", "STAGE_DECODER", "STAGE_ENCODER",
    "STAGE_JOINT", "SyntheticTeacher", "TeacherError", "TeacherSample", "TrainConfig",
    "ViewPolicy", "ViewSampler", "adam_step", "binarize", "consistency_check",
    "consistency_check_images", "cross_domain_segment", "decode", "distill_encoder",
    "encoder_forward", "encoder_loss", "evaluate_click_iou", "export_selection",
    "fusion_baseline", "generate_click_dataset", "init_decoder_params",
    "init_encoder_params", "interactive_attention", "iou", "load_checkpoint",
    "load_click_dataset", "load_config", "load_dataset", "load_obj", "make_server",
    "one_ring_neighbors", "otsu_threshold", "positional_encode", "project_click",
    "project_vertices", "rasterize", "read_mffi", "read_pgm", "read_png",
    "render_color", "sample_training_vertices", "save_checkpoint",
    "save_click_dataset", "save_config", "save_dataset", "save_obj", "segment",
    "serve_forever", "shade_attributes", "shade_backward", "stability_eval",
    "train_decoder", "train_joint_ablation", "validate_dataset",
    "visible_vertices", "write_mffi", "write_pgm", "write_png",
]
