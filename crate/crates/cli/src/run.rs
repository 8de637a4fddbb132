//! Task execution and report assembly for `flatband run`.

use crate::config::{short_name, ConfigError, RunConfig, Task};
use flatband_core::fock::{FockSector, ModeLayout, Variant};
use flatband_core::formfactor::{
    certificate_shells, certify_qc, certify_rank_with_tol, FormFactorError, FormFactorModel,
    ModelKind,
};
use flatband_core::hamiltonian::{assembly_plan, FbiHamiltonian};
use flatband_core::identities::{identity_suite, MAX_IDENTITY_MODES};
use flatband_core::kernelsolve::{
    hamiltonian_residual, lambda_block, null_space_characterization, null_space_direct,
    slater_span, subspace_distance, uniform_sector, CharacterizationResult, KernelResult,
    DIRECT_LIMIT,
};
use flatband_core::lattice::MomentumGrid;
use flatband_core::predict::{predict_dims, predict_dims_from_irreps, PredictedDims};
use flatband_core::reptheory::{
    combinations, embed_occupation, generated_irrep_dim, highest_weight_kernel, hook_dim,
    rectangular_survival, Partition, WedgeTensorSpace,
};
use flatband_core::theta::{omega, resolve_norm_sq_sign};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Principal angles above this count as disagreement between kernel bases.
pub const ANGLE_TOL: f64 = 1e-7;
/// Largest tensor space the rep-theory audit decomposes.
pub const AUDIT_MAX_DIM: usize = 1296;

pub const CSV_HEADER: &str = "variant,nkx,nky,model,lambda_plus,dim_predicted,dim_direct,dim_characterization,dim_slater_span,max_residual,principal_angle";

#[derive(Debug, Default, Clone)]
struct Row {
    direct: Option<usize>,
    characterization: Option<usize>,
    slater: Option<usize>,
    residual: Option<f64>,
    angle: Option<f64>,
}

impl Row {
    fn residual(&mut self, r: f64) {
        self.residual = Some(self.residual.map_or(r, |x| x.max(r)));
    }

    fn angle(&mut self, a: f64) {
        self.angle = Some(self.angle.map_or(a, |x| x.max(a)));
    }
}

pub struct Outcome {
    pub report: Value,
    pub csv: String,
    pub failures: Vec<String>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    grid: MomentumGrid,
    sector: FockSector,
    predicted: PredictedDims,
    model: Option<FormFactorModel>,
    rows: BTreeMap<usize, Row>,
    failures: Vec<String>,
    tasks: Map<String, Value>,
    direct: Option<KernelResult>,
    characterization: Option<CharacterizationResult>,
}

fn fmt_sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(if x > 0.0 { "inf" } else { "-inf" })
    }
}

impl<'a> Run<'a> {
    fn fail(&mut self, name: &str) {
        if !self.failures.iter().any(|f| f == name) {
            self.failures.push(name.to_string());
        }
    }

    fn hamiltonian(&self, model: &FormFactorModel) -> FbiHamiltonian {
        let plan = assembly_plan(&self.grid, self.cfg.qcut_factor, &self.cfg.kernel);
        FbiHamiltonian::new(model, &self.sector, &plan)
    }

    fn grid_check(&mut self) -> Value {
        let g = self.grid.clone();
        let mut closed = true;
        for k in 0..g.len() {
            let back = g.locate(&(-g.points[k]));
            closed &= back == Some(g.neg(k)) && g.neg(g.neg(k)) == k;
        }
        if !closed {
            self.fail("grid-inversion");
        }
        let points: Vec<Value> = g.points.iter().map(|p| json!([p.x, p.y])).collect();
        json!({
            "nk": g.len(),
            "points": points,
            "maxSpacing": g.max_spacing(),
            "inversionClosed": closed,
            "modes": self.sector.layout.n_modes(),
            "halfFilledDim": self.sector.dim(),
        })
    }

    fn formfactor_certify(&mut self) -> Value {
        let Some(model) = self.model.clone() else {
            return json!({"status": "failed", "reason": "form-factor model could not be built"});
        };
        let shells = certificate_shells(&model);
        let rank = match certify_rank_with_tol(&model, &shells, self.cfg.tolerances.rank) {
            Ok(c) => {
                json!({"passed": true, "rank": c.rank, "nk": self.grid.len(), "sigmaMin": c.sigma_min, "shells": c.shells_used})
            }
            Err(FormFactorError::RankDeficient { rank, nk, witness }) => {
                self.fail("rank-certificate");
                let w: Vec<Value> = witness.iter().map(|z| json!([z.re, z.im])).collect();
                json!({"passed": false, "rank": rank, "nk": nk, "shells": shells.len(), "witness": w})
            }
            Err(e) => {
                self.fail("rank-certificate");
                json!({"passed": false, "error": e.to_string()})
            }
        };
        let qc = match certify_qc(&model) {
            Ok(c) => json!({"passed": true, "qc": finite(c.qc), "spacing": c.spacing}),
            Err(e) => {
                self.fail("grid-spacing");
                json!({"passed": false, "error": e.to_string()})
            }
        };
        json!({"rank": rank, "qc": qc})
    }

    fn compare_dims(&mut self, per_lambda: &BTreeMap<usize, usize>, total: usize) {
        let want = self.predicted.total as usize;
        if total > want {
            self.fail("kernel-dim-excess");
        } else if total < want {
            self.fail("kernel-dim-deficit");
        } else {
            let pred: BTreeMap<usize, usize> = self
                .predicted
                .per_lambda
                .iter()
                .map(|&(l, d)| (l, d as usize))
                .collect();
            if &pred != per_lambda {
                self.fail("kernel-split-mismatch");
            }
        }
    }

    fn kernel_direct(&mut self) -> Value {
        let Some(model) = self.model.clone() else {
            return json!({"status": "skipped", "reason": "no form-factor model"});
        };
        if self.sector.dim() > DIRECT_LIMIT {
            return json!({"status": "skipped", "reason": format!("sector dimension {} exceeds {DIRECT_LIMIT}", self.sector.dim())});
        }
        let h = self.hamiltonian(&model);
        match null_space_direct(&h, self.cfg.tolerances.eig) {
            Ok((r, split)) => {
                self.compare_dims(&r.per_lambda, r.dim);
                if r.residual > self.cfg.tolerances.residual {
                    self.fail("kernel-residual");
                }
                for (&l, &d) in &r.per_lambda {
                    let row = self.rows.entry(l).or_default();
                    row.direct = Some(d);
                    row.residual(r.residual);
                }
                let v = json!({
                    "status": "done",
                    "dim": r.dim,
                    "predicted": self.predicted.total as u64,
                    "perLambda": per_lambda_json(&r.per_lambda),
                    "residual": r.residual,
                    "gap": finite(split.gap),
                    "lambdaMax": split.lambda_max,
                });
                self.direct = Some(r);
                v
            }
            Err(e) => {
                self.fail("kernel-gap");
                json!({"status": "failed", "error": e.to_string()})
            }
        }
    }

    fn kernel_characterize(&mut self) -> Value {
        let Some(model) = self.model.clone() else {
            return json!({"status": "skipped", "reason": "no form-factor model"});
        };
        let ch = match null_space_characterization(&self.sector, &self.grid) {
            Ok(c) => c,
            Err(e) => {
                self.fail("characterization");
                return json!({"status": "failed", "error": e.to_string()});
            }
        };
        let h = self.hamiltonian(&model);
        let mut blocks = Vec::new();
        for (l, basis) in &ch.per_lambda {
            let res = hamiltonian_residual(&h, basis);
            let row = self.rows.entry(*l).or_default();
            row.characterization = Some(basis.dim());
            row.residual(res);
            blocks.push(json!({"lambdaPlus": l, "dim": basis.dim(), "residual": res}));
            if res > self.cfg.tolerances.residual {
                self.fail("kernel-residual");
            }
        }
        self.compare_dims(&ch.total.per_lambda, ch.total.dim);
        let mut out = json!({
            "status": "done",
            "dim": ch.total.dim,
            "predicted": self.predicted.total as u64,
            "perLambda": per_lambda_json(&ch.total.per_lambda),
            "blocks": blocks,
        });
        if let Some(direct) = self.direct.take() {
            if direct.dim != ch.total.dim {
                self.fail("path-disagreement");
                out["directAngle"] = json!(null);
            } else {
                let a = subspace_distance(&direct.basis, &ch.total.basis).unwrap_or(f64::INFINITY);
                out["directAngle"] = finite(a);
                if a > ANGLE_TOL {
                    self.fail("path-disagreement");
                }
                for (l, basis) in &ch.per_lambda {
                    let block = lambda_block(&self.sector, &direct.basis, *l);
                    if let Ok(a) = subspace_distance(&block, basis) {
                        self.rows.entry(*l).or_default().angle(a);
                    }
                }
            }
            self.direct = Some(direct);
        }
        self.characterization = Some(ch);
        out
    }

    fn slater(&mut self) -> Value {
        let mut blocks = Vec::new();
        for &(l, want) in &self.predicted.per_lambda.clone() {
            let want = want as usize;
            let samples = 2 * want + 16;
            let span = slater_span(
                &self.sector,
                l,
                samples,
                self.cfg.seed.wrapping_add(l as u64),
            );
            if span.dim() != want {
                self.fail("slater-rank");
            }
            let mut entry =
                json!({"lambdaPlus": l, "rank": span.dim(), "predicted": want, "samples": samples});
            if let Some(ch) = &self.characterization {
                if let Some((_, basis)) = ch.per_lambda.iter().find(|(m, _)| *m == l) {
                    match subspace_distance(&span, basis) {
                        Ok(a) => {
                            entry["angle"] = finite(a);
                            if a > ANGLE_TOL {
                                self.fail("slater-angle");
                            }
                            self.rows.entry(l).or_default().angle(a);
                        }
                        Err(_) => entry["angle"] = json!(null),
                    }
                }
            }
            self.rows.entry(l).or_default().slater = Some(span.dim());
            blocks.push(entry);
        }
        json!({"status": "done", "blocks": blocks})
    }

    fn reptheory_audit(&mut self) -> Value {
        let variant = self.cfg.variant;
        let nk = self.grid.len();
        let mut out = Map::new();
        let irreps = predict_dims_from_irreps(variant, nk);
        let agree = irreps == self.predicted;
        if !agree {
            self.fail("prediction-mismatch");
        }
        out.insert("predictionsAgree".into(), json!(agree));
        let d = variant.nocc();
        let mut audits = Vec::new();
        for arity in 1..d {
            let leg = combinations(d, arity).len();
            let mut entry = Map::new();
            entry.insert("arity".into(), json!(arity));
            // embedding onto the uniform states
            let emb = embed_occupation(&self.sector, arity).expect("supported λ₊");
            let uniform = uniform_sector(&self.sector, arity).len();
            let m = emb.matrix(&self.sector);
            let iso =
                m.adjoint()
                    .mul(&m)
                    .max_abs_diff(&flatband_core::fock::SparseOperator::identity(
                        emb.tensor_dim(),
                    ));
            let bijective = emb.tensor_dim() == uniform && iso == 0.0;
            if !bijective {
                self.fail("occupation-embedding");
            }
            entry.insert("embeddingBijective".into(), json!(bijective));
            let legs = (1..=nk)
                .take_while(|&n| leg.pow(n as u32) <= AUDIT_MAX_DIM)
                .last()
                .unwrap_or(0);
            if legs == 0 {
                audits.push(Value::Object(entry));
                continue;
            }
            let space = WedgeTensorSpace::new(d, legs, arity).expect("bounded");
            let hw = highest_weight_kernel(d, legs, arity).expect("bounded");
            let mut classes: BTreeMap<Partition, (usize, usize)> = BTreeMap::new();
            let mut total = 0;
            for h in &hw {
                let p = h.partition();
                let dim = generated_irrep_dim(&space, &h.vector).unwrap_or(0);
                if dim as u128 != hook_dim(&p, d) {
                    self.fail("hook-dimension");
                }
                total += dim;
                classes.entry(p).or_insert((0, dim)).0 += 1;
            }
            if total != space.dim() {
                self.fail("complete-decomposition");
            }
            let cls: Vec<Value> = classes
                .iter()
                .map(|(p, (mult, dim))| json!({"partition": p.to_string(), "multiplicity": mult, "dim": dim}))
                .collect();
            entry.insert("legs".into(), json!(legs));
            entry.insert("tensorDim".into(), json!(space.dim()));
            entry.insert("classes".into(), json!(cls));
            if legs >= 2 && (d == 2 || d == 4) {
                let steps = rectangular_survival(d, arity, legs).expect("bounded");
                let mut ok = true;
                let mut st = Vec::new();
                for s in &steps {
                    let rect = Partition::new(vec![s.legs; arity]).expect("rectangle");
                    let survivors: Vec<String> = s
                        .classes
                        .iter()
                        .filter(|c| c.1)
                        .map(|c| c.0.to_string())
                        .collect();
                    ok &= survivors == vec![rect.to_string()];
                    st.push(
                        json!({"legs": s.legs, "survivors": survivors, "classes": s.classes.len()}),
                    );
                }
                if !ok {
                    self.fail("rectangular-survival");
                }
                entry.insert("rectangularSurvival".into(), json!(st));
            }
            audits.push(Value::Object(entry));
        }
        out.insert("status".into(), json!("done"));
        out.insert("sectors".into(), json!(audits));
        Value::Object(out)
    }

    fn identities(&mut self) -> Value {
        let Some(model) = self.model.clone() else {
            return json!({"status": "skipped", "reason": "no form-factor model"});
        };
        let modes = self.sector.layout.n_modes();
        if modes > MAX_IDENTITY_MODES {
            return json!({"status": "skipped", "reason": format!("{modes} modes exceed {MAX_IDENTITY_MODES}")});
        }
        match identity_suite(self.cfg.variant, &model, self.cfg.seed) {
            Ok(checks) => {
                for c in &checks {
                    if !c.passed {
                        self.fail(&format!("identity:{}", c.name));
                    }
                }
                json!({"status": "done", "checks": checks})
            }
            Err(e) => {
                self.fail("identity-suite");
                json!({"status": "failed", "error": e.to_string()})
            }
        }
    }

    fn csv(&self) -> String {
        let cfg = self.cfg;
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let sci = |x: Option<f64>| x.map(fmt_sci).unwrap_or_default();
        for &(l, want) in &self.predicted.per_lambda {
            let row = self.rows.get(&l).cloned().unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                short_name(cfg.variant),
                cfg.nkx,
                cfg.nky,
                model_name(cfg.model.kind),
                l,
                want,
                opt(row.direct),
                opt(row.characterization),
                opt(row.slater),
                sci(row.residual),
                sci(row.angle),
            );
        }
        s
    }
}

fn model_name(k: ModelKind) -> &'static str {
    k.name()
}

fn per_lambda_json(m: &BTreeMap<usize, usize>) -> Value {
    let obj: Map<String, Value> = m.iter().map(|(l, d)| (l.to_string(), json!(d))).collect();
    Value::Object(obj)
}

fn theta_sign_resolution(seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Complex64> = (0..10)
        .map(|_| Complex64::new(rng.random::<f64>(), 0.0) + omega() * rng.random::<f64>())
        .collect();
    let (sign, err, other) = resolve_norm_sq_sign(&pts);
    json!({"sign": sign, "error": err, "otherSignError": other, "points": 10})
}

/// Run every scheduled task. Config-level problems surface as `Err`.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, ConfigError> {
    let grid = MomentumGrid::new(cfg.nkx, cfg.nky)
        .map_err(|e| ConfigError(format!("invalid grid: {e}")))?;
    let layout =
        ModeLayout::new(cfg.variant, grid.len()).map_err(|e| ConfigError(e.to_string()))?;
    let sector = FockSector::half_filled(layout).map_err(|e| ConfigError(e.to_string()))?;
    let mut failures = Vec::new();
    let (model, model_error) = match FormFactorModel::new(
        cfg.model.kind,
        &grid,
        cfg.model.ell2,
        cfg.model.samples_per_axis,
    ) {
        Ok(m) => (Some(m), None),
        Err(e @ (FormFactorError::NonIntegerFlux(_) | FormFactorError::TooFewSamples(_))) => {
            return Err(ConfigError(format!("model: {e}")));
        }
        Err(e) => {
            failures.push("form-factor-model".to_string());
            (None, Some(e.to_string()))
        }
    };
    let mut run = Run {
        cfg,
        predicted: predict_dims(cfg.variant, grid.len()),
        grid,
        sector,
        model,
        rows: BTreeMap::new(),
        failures,
        tasks: Map::new(),
        direct: None,
        characterization: None,
    };
    let mut timings = Map::new();
    for task in cfg.schedule() {
        let start = Instant::now();
        let value = match task {
            Task::GridCheck => run.grid_check(),
            Task::FormfactorCertify => run.formfactor_certify(),
            Task::KernelDirect => run.kernel_direct(),
            Task::KernelCharacterize => run.kernel_characterize(),
            Task::SlaterSpan => run.slater(),
            Task::ReptheoryAudit => run.reptheory_audit(),
            Task::IdentitySuite => run.identities(),
        };
        let name = serde_json::to_value(task)
            .expect("task name")
            .as_str()
            .unwrap_or_default()
            .to_string();
        timings.insert(name.clone(), json!(start.elapsed().as_secs_f64()));
        run.tasks.insert(name, value);
    }
    let csv = run.csv();
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    config["model"]["ell2"] = json!(run.model.as_ref().map(|m| m.ell2));
    let dims: Vec<Value> = run
        .predicted
        .per_lambda
        .iter()
        .map(|&(l, want)| {
            let r = run.rows.get(&l).cloned().unwrap_or_default();
            json!({
                "lambdaPlus": l,
                "predicted": want as u64,
                "direct": r.direct,
                "characterization": r.characterization,
                "slaterSpan": r.slater,
                "maxResidual": r.residual,
                "principalAngle": r.angle,
            })
        })
        .collect();
    let kernel_dim = json!({
        "predicted": run.predicted.total as u64,
        "direct": run.direct.as_ref().map(|r| r.dim),
        "characterization": run.characterization.as_ref().map(|c| c.total.dim),
    });
    let report = json!({
        "kernelDim": kernel_dim,
        "config": config,
        "variantName": variant_long(cfg.variant),
        "scheduled": cfg.schedule(),
        "thetaExpansion": theta_sign_resolution(cfg.seed),
        "modelError": model_error,
        "predicted": {"total": run.predicted.total as u64, "perLambda": run.predicted.per_lambda.iter().map(|&(l, d)| json!([l, d as u64])).collect::<Vec<_>>()},
        "tasks": Value::Object(run.tasks.clone()),
        "dimensions": dims,
        "timingsSeconds": Value::Object(timings),
        "failures": run.failures.clone(),
        "passed": run.failures.is_empty(),
    });
    Ok(Outcome {
        report,
        csv,
        failures: run.failures,
    })
}

fn variant_long(v: Variant) -> &'static str {
    v.name()
}

pub fn write_outputs(out: &Outcome, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&out.report).expect("report serializes");
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    std::fs::write(dir.join("dimensions.csv"), &out.csv)
}
