//! Ground-truth corpora and the group-disjoint, stratified fold partition.

mod annotations;
mod folds;

pub use annotations::{
    load_annotations, Annotation, AnnotationSet, Category, CategoryId, ImageId, ImageInfo,
    Segmentation,
};
pub use folds::{
    fold_report, select_training_view, stratified_group_kfold, FoldPlan, FoldReport, FoldRow,
    FoldStats,
};
