//! Split a corpus with BaDLAD-like category counts into four stratified,
//! group-disjoint folds and build the training view for one validation fold.

use layout_ensemble::dataset::{fold_report, select_training_view, stratified_group_kfold};
use layout_ensemble::synthetic::layout_count_corpus;

fn main() -> layout_ensemble::Result<()> {
    let data = layout_count_corpus(2000, 11)?;
    let plan = stratified_group_kfold(&data, 4, 7)?;
    print!("{}", fold_report(&plan));

    let (train, val) = select_training_view(&data, &plan, 0, None)?;
    println!(
        "validation fold 0: {} images; training: {} images",
        val.images().len(),
        train.images().len()
    );
    Ok(())
}
