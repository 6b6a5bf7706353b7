//! JSON forms of run records, metrics and bound certificates.

use fatra_core::metrics::MetricsRecord;
use fatra_core::pipeline::{RunRecord, TrainConfig};
use fatra_core::theory::BoundCertificate;
use serde_json::{json, Map, Value};

pub fn metrics(m: &MetricsRecord) -> Value {
    json!({
        "acc": m.acc,
        "roc_auc": m.roc_auc,
        "delta_dp": m.delta_dp,
        "delta_eo": m.delta_eo,
        "composite": m.composite,
        "eo_skipped": m.eo_skipped,
    })
}

pub fn config(c: &TrainConfig) -> Value {
    json!({
        "epochs": c.epochs,
        "t1": c.t1, "t2": c.t2, "t3": c.t3, "t4": c.t4, "t5": c.t5,
        "lr_encoder": c.lr.encoder,
        "lr_discriminator": c.lr.discriminator,
        "lr_classifier": c.lr.classifier,
        "lr_generator": c.lr.generator,
        "tau": c.tau,
        "pool_size": c.pool_size,
        "edit_ratio": c.edit_ratio,
        "swap_period": c.swap_period,
        "hidden": c.hidden,
        "embed": c.embed,
        "classifier_hidden": c.classifier_hidden,
        "discriminator_hidden": c.discriminator_hidden,
        "generator_hidden": c.generator_hidden,
        "seed": c.seed,
        "components": {
            "adversarial": c.components.adversarial,
            "generation": c.components.generation,
            "modification": c.components.modification,
            "alignment": c.components.alignment,
        },
    })
}

pub fn run(r: &RunRecord) -> Value {
    let epochs: Vec<Value> = r
        .epochs
        .iter()
        .map(|e| {
            json!({
                "epoch": e.epoch,
                "loss_adversarial": e.losses.adversarial,
                "loss_classification": e.losses.classification,
                "loss_generator": e.losses.generator,
                "loss_alignment": e.losses.alignment,
                "train_acc": e.train_acc,
                "pool_index": e.pool_index,
                "generated_gap": e.generated_gap.map(|g| g.0),
                "generated_gap_rms": e.generated_gap.map(|g| g.1),
                "val": metrics(&e.val),
            })
        })
        .collect();
    let tests: Map<String, Value> = r.tests.iter().map(|(name, m)| (name.clone(), metrics(m))).collect();
    json!({
        "method": r.method,
        "seed": r.seed,
        "config": config(&r.config),
        "selected_epoch": r.selected_epoch,
        "steps": {
            "t1": r.counters.t1, "t2": r.counters.t2, "t3": r.counters.t3,
            "t4": r.counters.t4, "t5": r.counters.t5,
        },
        "tests": tests,
        "epochs": epochs,
    })
}

pub fn certificate(c: &BoundCertificate, context: &str) -> Value {
    let terms: Map<String, Value> = c.terms.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "theorem": c.theorem.id(),
        "context": context,
        "lower": c.lower,
        "upper": c.upper,
        "observed": c.observed,
        "verdict": c.verdict.as_str(),
        "slack": c.slack,
        "partial": c.partial,
        "terms": terms,
    })
}

/// One compact JSON object per line.
pub fn json_lines(values: &[Value]) -> String {
    let mut out = String::new();
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}
