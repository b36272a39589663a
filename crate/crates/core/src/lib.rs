//! Ghost-convolution small-object detector toolkit.
//!
//! A CPU inference engine for a YOLOv5-style network whose convolutions are
//! ghost modules (half the channels from a real convolution, half from a
//! cheap depthwise pass over them), plus the tooling around it: dataset
//! auto-anchoring, detection evaluation, a decoupled-weight-decay optimizer
//! step and a small binary weight archive.
//!
//! ```
//! use gaanet::{build_graph, NetConfig};
//!
//! let graph = build_graph(&NetConfig::gaanet()).unwrap();
//! assert_eq!(graph.detect_strides(), vec![4, 8, 16, 32]);
//! assert_eq!(graph.count_params(), 6_466_316);
//! ```

pub mod autoanchor;
pub mod boxes;
pub mod commands;
pub mod config;
pub mod decode;
pub mod error;
pub mod eval;
pub mod ghost;
pub mod graph;
pub mod optim;
pub mod pnm;
pub mod render;
pub mod tensor;
pub mod weights;

pub use autoanchor::{
    auto_anchor, best_possible_recall, evolve_anchors, fitness, kmeans_anchors, load_labels, AnchorSet, GaConfig,
    LabelSet,
};
pub use boxes::{BBox, Detection, GroundTruth};
pub use config::{parse_config, NetConfig};
pub use decode::decode_detections;
pub use error::{Error, Result};
pub use eval::{average_precision, ciou, evaluate, iou, match_predictions, nms, MetricsReport};
pub use ghost::{c3ghost, ghost_bottleneck, ghost_conv, sppf, Block, GhostConvSpec, ParamSource};
pub use graph::{build_graph, forward, Graph, Model};
pub use optim::{adamw_step, AdamWConfig, OptimState};
pub use tensor::{concat_channels, conv2d, letterbox, maxpool2d, upsample_nearest2x, ConvParams, Tensor};
pub use weights::{init_random, read_weights, write_weights, WeightArchive};
