//! End-to-end generation, config replay, seed validation and rephrasing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, DifficultyFeatures, Fingerprint};
use crate::error::{Error, Result};
use crate::expr::{plugin, Env, Lambda, Operator, Operators, Template, Value};
use crate::qa::{self, AnswerRecord, BuiltOptions};
use crate::record::{join_answers, DatasetRecord, OneOrMany};
use crate::render::{self, WrapperSet};
use crate::rng::RngStream;
use crate::sampler::{self, Pick, SelectionResult};
use crate::solver::term::Term;
use crate::solver::{self, Backend, ConstraintSet, Direction, FdBackend, Model, SolveOptions};
use crate::spec::{
    serialize_spec, AnsText, Config, ConditionDecl, InstanceParams, OperatorDef, OptimizeDirection, OptionParams,
    PuzzleTemplate, QueryKind, QueryParams, SelectionSpec, SymbolKind, VariableKind,
};
use crate::symbols::{key_text, normalize_source, Group, GroupKind, VarInfo};

/// Full-instance resamples before [`Error::GenerationExhausted`].
pub const RETRY_BUDGET: usize = 32;

/// Query name and its rendered block.
type QueryBlock = (String, String);

/// Builtins that consume randomness.
const RANDOM_BUILTINS: [&str; 3] = ["randint", "get_faker", "entity_fakers"];

static NEXT_TAG: AtomicU64 = AtomicU64::new(1);

fn fresh_tag() -> u64 {
    NEXT_TAG.fetch_add(1, Ordering::Relaxed)
}

/// Generation limits.
#[derive(Debug, Clone)]
pub struct GenerateOptions {
    /// Attempts per instance.
    pub retry_budget: usize,
    pub solve: SolveOptions,
    /// Worker threads for batches; 0 uses the available parallelism.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            retry_budget: RETRY_BUDGET,
            solve: SolveOptions::default(),
            jobs: 1,
        }
    }
}

/// One generated puzzle.
#[derive(Debug, Clone, PartialEq)]
pub struct PuzzleInstance {
    pub id: String,
    pub seq: u64,
    pub source: String,
    pub question: String,
    pub answers: Vec<AnswerRecord>,
    pub config: Config,
    pub features: DifficultyFeatures,
    pub fingerprint: Fingerprint,
}

impl PuzzleInstance {
    /// Dataset line, with a wrapped prompt when `wrappers` is given.
    pub fn to_record(&self, wrappers: Option<&WrapperSet>) -> Result<DatasetRecord> {
        let prompt = match wrappers {
            Some(w) => Some(render::wrap_prompt(&self.question, &self.answers, w)?),
            None => None,
        };
        Ok(DatasetRecord {
            id: self.id.clone(),
            source: self.source.clone(),
            qtype: OneOrMany::from_vec(self.answers.iter().map(|a| a.qtype.clone()).collect()),
            eval_type: OneOrMany::from_vec(self.answers.iter().map(|a| a.eval_type).collect()),
            question: self.question.clone(),
            answer: join_answers(&self.answers),
            answers: self.answers.clone(),
            config: self.config.clone(),
            fingerprint: self.fingerprint.to_string(),
            difficulty: self.features.clone(),
            prompt,
        })
    }
}

/// Where the randomized choices of one build come from.
enum Mode<'a> {
    Random,
    /// Read every choice from a config, except variables in `redraw`.
    Replay { cfg: &'a Config, redraw: BTreeSet<String> },
}

impl Mode<'_> {
    fn config(&self) -> Option<&Config> {
        match self {
            Mode::Random => None,
            Mode::Replay { cfg, .. } => Some(cfg),
        }
    }
}

/// Product of one build attempt, before the id is assigned.
struct Built {
    question: String,
    answers: Vec<AnswerRecord>,
    config: Config,
    features: DifficultyFeatures,
}

fn shape_error(what: String) -> Error {
    Error::ConfigShapeMismatch(what)
}

fn compile_operators(t: &PuzzleTemplate) -> Result<Operators> {
    let mut ops = Operators::new();
    for (name, def) in &t.custom_operators {
        let op = match def {
            OperatorDef::Lambda { params, body, .. } => Operator::Lambda(Rc::new(Lambda {
                params: params.clone(),
                body: body.clone(),
            })),
            OperatorDef::Plugin(p) => {
                let (n, f) = plugin(p).ok_or_else(|| Error::UnknownOperatorTag(p.clone()))?;
                Operator::Plugin(n, f)
            }
        };
        ops.insert(name.clone(), op);
    }
    Ok(ops)
}

fn render_bound(t: &Template, env: &mut Env, bindings: &[(&str, Value)]) -> Result<String> {
    let mark = env.mark();
    for (n, v) in bindings {
        env.push_local(n, v.clone());
    }
    let r = t.render(env);
    env.reset(mark);
    r
}

/// Variables whose formulas consume randomness, directly or through operators.
fn random_variables(t: &PuzzleTemplate) -> BTreeSet<String> {
    let random_ops: BTreeSet<&str> = t
        .custom_operators
        .iter()
        .filter(|(_, d)| match d {
            OperatorDef::Lambda { body, .. } => RANDOM_BUILTINS.iter().any(|b| body.called_functions().contains(*b)),
            OperatorDef::Plugin(_) => false,
        })
        .map(|(n, _)| n.as_str())
        .collect();
    t.variables
        .iter()
        .filter(|v| match &v.kind {
            VariableKind::Formula(f) => f
                .expr
                .called_functions()
                .iter()
                .any(|c| RANDOM_BUILTINS.contains(&c.as_str()) || random_ops.contains(c.as_str())),
            VariableKind::Domain { .. } => true,
        })
        .map(|v| v.name.clone())
        .collect()
}

/// Append boolean constraint terms from a formula result.
fn constraint_terms(v: &Value, label: &str, out: &mut Vec<Rc<Term>>) -> Result<()> {
    match v.folded() {
        Value::Bool(b) => out.push(Rc::new(Term::Bool(b))),
        Value::Term(t) => {
            if t.sort() != solver::term::Sort::Bool {
                return Err(Error::FormulaType(format!("`{label}` yields the integer term `{t}`")));
            }
            out.push(t);
        }
        Value::List(xs) | Value::Tuple(xs) => {
            for x in xs.iter() {
                constraint_terms(x, label, out)?;
            }
        }
        other => return Err(Error::FormulaType(format!("`{label}` yields {}", other.type_name()))),
    }
    Ok(())
}

fn product(pools: &[Vec<Value>]) -> Vec<Value> {
    let mut keys: Vec<Vec<Value>> = vec![Vec::new()];
    for pool in pools {
        let mut next = Vec::with_capacity(keys.len() * pool.len());
        for k in &keys {
            for x in pool {
                let mut k2 = k.clone();
                k2.push(x.clone());
                next.push(k2);
            }
        }
        keys = next;
    }
    keys.into_iter()
        .map(|mut k| if k.len() == 1 { k.remove(0) } else { Value::tuple(k) })
        .collect()
}

/// Per-instance state shared by the build steps.
struct Build<'a> {
    t: &'a PuzzleTemplate,
    mode: Mode<'a>,
    env: Env,
    config: Config,
    assertions: Vec<(String, Rc<Term>)>,
    /// Rendered desc per condition, in declaration order.
    cond_descs: Vec<(String, String, bool)>,
    /// Parameters of dynamic condition instances, for the redundancy guard.
    forbidden: Vec<Value>,
}

impl<'a> Build<'a> {
    /// Draw or replay the picks of one selection.
    fn select(&mut self, kind: &str, name: &str, spec: &SelectionSpec, pools: &[Vec<Value>], amounts: Option<&[usize]>) -> Result<SelectionResult> {
        match &self.mode {
            Mode::Random => {
                let count = sampler::eval_count(spec.domain.as_ref(), &mut self.env)?;
                sampler::select_with_constraints(pools, spec, amounts, count, &mut self.env)
            }
            Mode::Replay { cfg, .. } => {
                let recorded = match kind {
                    "symbol" => cfg.symbol_params.get(name),
                    _ => cfg.condition_params.get(name),
                }
                .ok_or_else(|| shape_error(format!("config has no selections for {kind} `{name}`")))?;
                let picks = recorded
                    .iter()
                    .map(|p| match &p.indices {
                        Some(i) => Ok(i.clone()),
                        None => sampler::locate_pick(pools, amounts, spec.dim, &p.params, &self.env.symbols),
                    })
                    .collect::<Result<Vec<Pick>>>()?;
                sampler::replay_selection(pools, spec, amounts, &picks)
            }
        }
    }

    fn record(&self, sel: &SelectionResult) -> Result<Vec<InstanceParams>> {
        sel.tuples
            .iter()
            .zip(&sel.indices)
            .map(|(tuple, pick)| {
                Ok(InstanceParams {
                    params: self.env.symbols.plain_json(tuple)?,
                    indices: Some(pick.clone()),
                })
            })
            .collect()
    }

    fn variables(&mut self) -> Result<Vec<sampler::VarDraw>> {
        let t = self.t;
        let mut fixed = HashMap::new();
        if let Mode::Replay { cfg, redraw } = &self.mode {
            let declared: BTreeSet<&str> = t.variables.iter().map(|v| v.name.as_str()).collect();
            for k in cfg.variable_values.keys() {
                if !declared.contains(k.as_str()) {
                    return Err(shape_error(format!("config sets unknown variable `{k}`")));
                }
            }
            let redrawn = sampler::dependents(t, &redraw.iter().cloned().collect::<Vec<_>>());
            for name in random_variables(t) {
                let v = cfg
                    .variable_values
                    .get(&name)
                    .ok_or_else(|| shape_error(format!("config has no value for variable `{name}`")))?;
                if !redrawn.contains(&name) {
                    fixed.insert(name, Value::from_json(v)?);
                }
            }
        }
        let draws = sampler::sample_variables(t, &mut self.env, &fixed)?;
        for d in &draws {
            self.config.variable_values.insert(d.name.clone(), d.value.to_json()?);
        }
        Ok(draws)
    }

    fn defined_symbol(&mut self, name: &str, source: &[crate::spec::Code], attrs: &[String], sorts: &[solver::term::Sort], desc: &[Template]) -> Result<()> {
        let pools = sampler::eval_pools(source, &mut self.env)?;
        let keys = product(&pools);
        let group_name: Rc<str> = Rc::from(name);
        let mut vars = Vec::with_capacity(keys.len());
        let mut key_index = HashMap::new();
        let mut descs = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            key_index.insert(key_text(key)?, i);
            let base = format!("{name}[{}]", key.py_repr()?);
            let row = if attrs.is_empty() {
                vec![self.env.symbols.declare(VarInfo {
                    name: base,
                    sort: sorts[0],
                    group: group_name.clone(),
                    key: i,
                    attr: None,
                })]
            } else {
                attrs
                    .iter()
                    .zip(sorts)
                    .enumerate()
                    .map(|(a, (attr, sort))| {
                        self.env.symbols.declare(VarInfo {
                            name: format!("{base}.{attr}"),
                            sort: *sort,
                            group: group_name.clone(),
                            key: i,
                            attr: Some(a),
                        })
                    })
                    .collect()
            };
            vars.push(row);
            if !desc.is_empty() {
                let bindings = [("_names", key.clone()), ("_index", Value::Int(i as i64))];
                let parts = desc
                    .iter()
                    .map(|d| render_bound(d, &mut self.env, &bindings).map(|s| s.trim().to_string()))
                    .collect::<Result<Vec<_>>>()?;
                descs.push(parts.join("; "));
            }
        }
        let group = Rc::new(Group {
            name: name.to_string(),
            kind: GroupKind::Defined {
                sources: source.iter().map(|s| normalize_source(&s.text)).collect(),
                keys,
                key_index,
                attrs: attrs.to_vec(),
                vars,
            },
            descs,
        });
        self.env.symbols.groups.insert(name.to_string(), group.clone());
        self.env.set(name, Value::Group(group));
        Ok(())
    }

    fn derived_symbol(&mut self, name: &str, selection: &SelectionSpec, formula: Option<&crate::spec::Code>, desc: Option<&Template>) -> Result<()> {
        let pools = sampler::eval_pools(&selection.source, &mut self.env)?;
        let amounts = sampler::eval_amounts(selection, &mut self.env)?;
        let sel = self.select("symbol", name, selection, &pools, amounts.as_deref())?;
        let mut elements = Vec::with_capacity(sel.tuples.len());
        let mut descs = Vec::new();
        for (i, tuple) in sel.tuples.iter().enumerate() {
            let bindings = [("_sym", tuple.clone()), ("_index", Value::Int(i as i64))];
            elements.push(match formula {
                Some(f) => self.env.eval_with(&f.expr, &bindings)?,
                None => tuple.clone(),
            });
            if let Some(d) = desc {
                descs.push(render_bound(d, &mut self.env, &bindings)?.trim().to_string());
            }
        }
        let params = self.record(&sel)?;
        self.config.symbol_params.insert(name.to_string(), params);
        let group = Rc::new(Group {
            name: name.to_string(),
            kind: GroupKind::Derived { elements },
            descs,
        });
        self.env.symbols.groups.insert(name.to_string(), group.clone());
        self.env.set(name, Value::Group(group));
        Ok(())
    }

    fn symbols(&mut self) -> Result<()> {
        let t = self.t;
        if let Some(cfg) = self.mode.config() {
            for k in cfg.symbol_params.keys() {
                if !matches!(t.symbol(k).map(|s| &s.kind), Some(SymbolKind::Derived { .. })) {
                    return Err(shape_error(format!("config selects unknown derived symbol `{k}`")));
                }
            }
        }
        for s in &t.symbols {
            match &s.kind {
                SymbolKind::Defined {
                    source,
                    attrs,
                    sorts,
                    desc,
                } => self.defined_symbol(&s.name, source, attrs, sorts, desc)?,
                SymbolKind::Derived {
                    selection,
                    formula,
                    desc,
                } => self.derived_symbol(&s.name, selection, formula.as_ref(), desc.as_ref())?,
            }
        }
        Ok(())
    }

    fn condition(&mut self, c: &ConditionDecl) -> Result<()> {
        let mut terms = Vec::new();
        let desc = match &c.selection {
            None => {
                let v = self.env.eval_with(&c.formula.expr, &[])?;
                constraint_terms(&v, &c.name, &mut terms)?;
                match &c.desc {
                    Some(d) => d.render(&mut self.env)?.trim().to_string(),
                    None => String::new(),
                }
            }
            Some(selection) => {
                let pools = sampler::eval_pools(&selection.source, &mut self.env)?;
                let amounts = sampler::eval_amounts(selection, &mut self.env)?;
                let sel = self.select("condition", &c.name, selection, &pools, amounts.as_deref())?;
                let mut descs = Vec::with_capacity(sel.tuples.len());
                for (i, tuple) in sel.tuples.iter().enumerate() {
                    let bindings = [("_sym", tuple.clone()), ("_index", Value::Int(i as i64))];
                    let v = self.env.eval_with(&c.formula.expr, &bindings)?;
                    constraint_terms(&v, &c.name, &mut terms)?;
                    if let Some(d) = &c.desc {
                        descs.push(render_bound(d, &mut self.env, &bindings)?);
                    }
                    self.forbidden.push(tuple.clone());
                }
                let params = self.record(&sel)?;
                self.config.condition_params.insert(c.name.clone(), params);
                render::join_instances(&descs)
            }
        };
        for (i, term) in terms.into_iter().enumerate() {
            self.assertions.push((format!("{}#{i}", c.name), term));
        }
        self.cond_descs.push((c.name.clone(), desc, c.desc.is_some()));
        Ok(())
    }

    fn conditions(&mut self) -> Result<()> {
        let t = self.t;
        if let Some(cfg) = self.mode.config() {
            for k in cfg.condition_params.keys() {
                if !t.condition(k).is_some_and(ConditionDecl::is_dynamic) {
                    return Err(shape_error(format!("config selects unknown dynamic condition `{k}`")));
                }
            }
        }
        for c in &t.conditions {
            self.condition(c)?;
        }
        Ok(())
    }

    fn constraint_set(&self) -> ConstraintSet {
        let mut cs = ConstraintSet::new(self.env.symbols.sorts());
        for (label, t) in &self.assertions {
            cs.assert(label.clone(), t.clone());
        }
        cs
    }

    /// Phase-one solve, post-generation variables and conditions.
    fn post_generation(&mut self, backend: &mut dyn Backend, opts: &SolveOptions) -> Result<()> {
        let t = self.t;
        let Some(post) = &t.post_generation else {
            return Ok(());
        };
        let seed = match &self.mode {
            Mode::Random => self.env.rng("post-generation solve")?.next_u64(),
            Mode::Replay { cfg, .. } => cfg
                .rng_seed
                .ok_or_else(|| shape_error("config has no rng_seed for the first-phase solve".into()))?,
        };
        self.config.rng_seed = Some(seed);
        let frozen = match &self.mode {
            Mode::Replay { cfg, redraw } if redraw.is_empty() && !cfg.post_values.is_empty() => Some(&cfg.post_values),
            _ => None,
        };
        if let Some(frozen) = frozen {
            let declared: BTreeSet<&str> = post.vars.iter().map(|(n, _)| n.as_str()).collect();
            if frozen.keys().map(String::as_str).collect::<BTreeSet<_>>() != declared {
                return Err(shape_error("config post_values do not match the post-generation variables".into()));
            }
            for (name, v) in frozen {
                self.env.set(name, Value::from_json(v)?);
            }
            self.config.post_values = frozen.clone();
        } else {
            let cs = self.constraint_set();
            let phase_opts = SolveOptions {
                seed: Some(seed),
                ..opts.clone()
            };
            let values = backend.check(&cs, &phase_opts)?.ok_or(Error::Infeasible)?;
            let sol = Value::Model(Rc::new(Model {
                tag: self.env.model_tag,
                values,
            }));
            self.env.set("_sol", sol);
            let mut recorded = BTreeMap::new();
            for (name, code) in &post.vars {
                let v = self.env.eval_with(&code.expr, &[])?.folded();
                // Values that are not plain data are recomputed from the seed on replay.
                if let Ok(j) = v.to_json() {
                    recorded.insert(name.clone(), j);
                }
                self.env.set(name, v);
            }
            self.env.unset("_sol");
            if recorded.len() == post.vars.len() {
                self.config.post_values = recorded;
            }
        }
        for c in &post.conditions {
            self.condition(c)?;
        }
        Ok(())
    }

    fn solve(&mut self, opts: &SolveOptions) -> Result<Vec<Rc<Model>>> {
        let t = self.t;
        let mut backend = FdBackend;
        self.post_generation(&mut backend, opts)?;
        let cs = self.constraint_set();
        let tag = self.env.model_tag;
        let solve_opts = SolveOptions {
            seed: None,
            ..opts.clone()
        };
        if let Some(o) = &t.optimize {
            let objective = self.env.eval_with(&o.formula.expr, &[])?.to_term()?;
            let dir = match o.direction {
                OptimizeDirection::Minimize => Direction::Minimize,
                OptimizeDirection::Maximize => Direction::Maximize,
            };
            let opt = solver::optimize_objective(&mut backend, &cs, dir, &objective, tag, &solve_opts)?;
            return Ok(vec![opt.model]);
        }
        if !t.calc_solution {
            let values = backend.check(&cs, &solve_opts)?.ok_or(Error::Infeasible)?;
            return Ok(vec![Rc::new(Model { tag, values })]);
        }
        let set = solver::enumerate_models(&mut backend, &cs, t.max_solution, tag, &solve_opts)?;
        if set.models.is_empty() {
            return Err(Error::EmptySolutionSet);
        }
        if set.truncated && !t.queries.is_empty() {
            return Err(Error::TruncatedSolutionSet(set.limit));
        }
        Ok(set.models)
    }

    fn option_params(&self, built: &BuiltOptions) -> Result<QueryParams> {
        let options = built
            .chosen
            .iter()
            .map(|c| {
                Ok(OptionParams {
                    template: c.template,
                    params: self.env.symbols.plain_json(&c.binding)?,
                    indices: Some(c.pick.clone()),
                })
            })
            .collect::<Result<_>>()?;
        Ok(QueryParams { options })
    }

    /// Answers plus `(query name, rendered block)` pairs.
    fn queries(&mut self, models: &[Rc<Model>]) -> Result<(Vec<AnswerRecord>, Vec<QueryBlock>)> {
        let t = self.t;
        if let Some(cfg) = self.mode.config() {
            for k in cfg.query_params.keys() {
                if !matches!(t.query(k).map(|q| &q.kind), Some(QueryKind::Selection { .. })) {
                    return Err(shape_error(format!("config has options for unknown selection query `{k}`")));
                }
            }
        }
        let mut answers = Vec::new();
        let mut blocks = Vec::new();
        for q in &t.queries {
            let answer = match &q.kind {
                QueryKind::Open { .. } => qa::answer_open_query(q, &mut self.env, models)?,
                QueryKind::Selection { .. } => {
                    let built = match &self.mode {
                        Mode::Random => qa::build_selection_query(q, &mut self.env, models, &self.forbidden)?,
                        Mode::Replay { cfg, .. } => {
                            let recorded = cfg
                                .query_params
                                .get(&q.name)
                                .ok_or_else(|| shape_error(format!("config has no options for query `{}`", q.name)))?;
                            qa::replay_selection_query(q, &mut self.env, models, &recorded.options)?
                        }
                    };
                    let params = self.option_params(&built)?;
                    self.config.query_params.insert(q.name.clone(), params);
                    built.answer
                }
            };
            let desc = q.desc.render(&mut self.env)?;
            blocks.push((q.name.clone(), render::query_block(&desc, &answer)));
            answers.push(answer);
        }
        Ok((answers, blocks))
    }

    fn render(&mut self, blocks: &[(String, String)]) -> Result<String> {
        let mut bindings: Vec<(String, Value)> = Vec::new();
        let aggregate: Vec<&str> = self
            .cond_descs
            .iter()
            .filter(|(_, d, has)| *has && !d.is_empty())
            .map(|(_, d, _)| d.as_str())
            .collect();
        bindings.push(("conditions".into(), Value::str(&aggregate.join(" "))));
        let queries: Vec<&str> = blocks.iter().map(|(_, b)| b.as_str()).collect();
        bindings.push(("queries".into(), Value::str(&queries.join("\n"))));
        for (name, d, _) in &self.cond_descs {
            bindings.push((name.clone(), Value::str(d)));
        }
        for (name, b) in blocks {
            bindings.push((name.clone(), Value::str(b)));
        }
        let refs: Vec<(&str, Value)> = bindings.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        Ok(render_bound(&self.t.desc, &mut self.env, &refs)?.trim().to_string())
    }
}

fn features(t: &PuzzleTemplate, draws: &[sampler::VarDraw], sym_num: usize, cond_num: usize, question: &str) -> DifficultyFeatures {
    let mut adjusted = Vec::new();
    for d in draws {
        let Some(def) = t.variable(&d.name) else { continue };
        let (Some((lo, hi)), Ok(v)) = (d.interval, d.value.as_f64()) else {
            continue;
        };
        if def.diff_factor == 0 {
            continue;
        }
        match corpus::adjusted_value(v, lo, hi, def.diff_factor) {
            Some(a) => adjusted.push(a),
            None => log::warn!("variable `{}` has a degenerate interval [{lo}, {hi}]; skipped in var_scale", d.name),
        }
    }
    DifficultyFeatures {
        sym_num,
        cond_num,
        desc_len: question.chars().count(),
        var_scale: corpus::var_scale(&adjusted),
        score: None,
    }
}

/// Evaluation state left after a build.
struct Parts {
    env: Env,
    constraints: ConstraintSet,
    models: Vec<Rc<Model>>,
}

fn build(t: &PuzzleTemplate, mode: Mode<'_>, rng: Option<RngStream>, opts: &SolveOptions) -> Result<Built> {
    build_parts(t, mode, rng, opts).map(|(b, _)| b)
}

fn build_parts(t: &PuzzleTemplate, mode: Mode<'_>, rng: Option<RngStream>, opts: &SolveOptions) -> Result<(Built, Parts)> {
    if let Some(cfg) = mode.config() {
        if cfg.spec_id != t.id {
            return Err(shape_error(format!("config belongs to spec `{}`, not `{}`", cfg.spec_id, t.id)));
        }
    }
    let mut env = Env::new();
    env.rng = rng;
    env.model_tag = fresh_tag();
    env.operators = Rc::new(compile_operators(t)?);
    let mut b = Build {
        t,
        mode,
        env,
        config: Config::new(&t.id),
        assertions: Vec::new(),
        cond_descs: Vec::new(),
        forbidden: Vec::new(),
    };
    let draws = b.variables()?;
    b.symbols()?;
    b.conditions()?;
    let models = b.solve(opts)?;
    let (answers, blocks) = b.queries(&models)?;
    let question = b.render(&blocks)?;
    let f = features(t, &draws, b.env.symbols.vars.len(), b.assertions.len(), &question);
    let constraints = b.constraint_set();
    Ok((
        Built {
            question,
            answers,
            config: b.config,
            features: f,
        },
        Parts {
            env: b.env,
            constraints,
            models,
        },
    ))
}

fn finish(t: &PuzzleTemplate, built: Built, seq: u64) -> PuzzleInstance {
    let hash = corpus::sha256_hex(&built.config.to_canonical_string());
    PuzzleInstance {
        id: format!("{}-{seq:06}", &hash[..8]),
        seq,
        source: t.id.clone(),
        fingerprint: corpus::canonical_fingerprint(&built.config, t),
        question: built.question,
        answers: built.answers,
        config: built.config,
        features: built.features,
    }
}

/// Resample counts per failure class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureStats {
    pub attempts: usize,
    pub failures: BTreeMap<String, usize>,
}

impl FailureStats {
    fn merge(&mut self, other: &FailureStats) {
        self.attempts += other.attempts;
        for (k, v) in &other.failures {
            *self.failures.entry(k.clone()).or_default() += v;
        }
    }
}

fn attempt_loop(
    t: &PuzzleTemplate,
    mut rng: RngStream,
    opts: &GenerateOptions,
    max_attempts: usize,
    abort: &dyn Fn() -> bool,
    stats: &mut FailureStats,
) -> Result<PuzzleInstance> {
    let seq = rng.job_index();
    let mut last = None;
    for _ in 0..max_attempts {
        if abort() {
            break;
        }
        stats.attempts += 1;
        // every attempt continues the job's stream
        let attempt_rng = RngStream::new(rng.next_u64(), seq);
        match build(t, Mode::Random, Some(attempt_rng), &opts.solve) {
            Ok(b) => return Ok(finish(t, b, seq)),
            Err(e) if e.is_resamplable() => {
                log::debug!("{}: attempt failed: {e}", t.id);
                *stats.failures.entry(e.class().to_string()).or_default() += 1;
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationExhausted {
        attempts: stats.attempts,
        last: Box::new(last.unwrap_or(Error::Infeasible)),
    })
}

/// Generate one instance from `rng`, resampling on recoverable failures.
pub fn generate_one(t: &PuzzleTemplate, rng: RngStream, opts: &GenerateOptions) -> Result<PuzzleInstance> {
    generate_one_with_stats(t, rng, opts).0
}

/// [`generate_one`] plus the failure accounting.
pub fn generate_one_with_stats(t: &PuzzleTemplate, rng: RngStream, opts: &GenerateOptions) -> (Result<PuzzleInstance>, FailureStats) {
    let mut stats = FailureStats::default();
    let r = attempt_loop(t, rng, opts, opts.retry_budget, &|| false, &mut stats);
    (r, stats)
}

/// A generated batch in job order.
#[derive(Debug, Clone)]
pub struct Batch {
    pub instances: Vec<PuzzleInstance>,
    pub stats: FailureStats,
}

/// Generate `n` instances; job `i` uses stream `(seed, i)`.
///
/// Failures draw on a shared budget of `n * retry_budget` attempts, so
/// one hard instance may retry longer than the per-instance budget.
pub fn generate_batch(t: &PuzzleTemplate, n: usize, seed: u64, opts: &GenerateOptions) -> Result<Batch> {
    generate_batch_with(t, n, seed, opts, &|_| {})
}

/// [`generate_batch`] with a progress callback receiving completed counts.
pub fn generate_batch_with(t: &PuzzleTemplate, n: usize, seed: u64, opts: &GenerateOptions, progress: &(dyn Fn(usize) + Sync)) -> Result<Batch> {
    if n == 0 {
        return Ok(Batch {
            instances: Vec::new(),
            stats: FailureStats::default(),
        });
    }
    let budget = n.saturating_mul(opts.retry_budget);
    let failures = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PuzzleInstance>>>> = Mutex::new((0..n).map(|_| None).collect());
    let stats = Mutex::new(FailureStats::default());
    let workers = match opts.jobs {
        0 => std::thread::available_parallelism().map_or(1, |p| p.get()),
        j => j,
    }
    .min(n);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= n {
            return;
        }
        let mut local = FailureStats::default();
        let abort = || failures.load(Ordering::Relaxed) > budget;
        let r = attempt_loop(t, RngStream::new(seed, i as u64), opts, budget + 1, &abort, &mut local);
        let failed_attempts = local.attempts - usize::from(r.is_ok());
        failures.fetch_add(failed_attempts, Ordering::Relaxed);
        stats.lock().unwrap().merge(&local);
        results.lock().unwrap()[i] = Some(r);
        progress(done.fetch_add(1, Ordering::Relaxed) + 1);
    };
    if workers <= 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }
    let stats = stats.into_inner().unwrap();
    let total_failures = failures.load(Ordering::Relaxed);
    let results = results.into_inner().unwrap();
    let mut instances = Vec::with_capacity(n);
    let mut last = None;
    for r in results {
        match r.expect("every job ran") {
            Ok(inst) => instances.push(inst),
            Err(Error::GenerationExhausted { last: l, .. }) => last = Some(*l),
            Err(e) => return Err(e),
        }
    }
    if total_failures > budget || instances.len() < n {
        return Err(Error::GenerationExhausted {
            attempts: stats.attempts,
            last: Box::new(last.unwrap_or(Error::Infeasible)),
        });
    }
    Ok(Batch { instances, stats })
}

/// Rebuild an instance from its config without randomness.
pub fn reproduce_from_config(t: &PuzzleTemplate, c: &Config) -> Result<PuzzleInstance> {
    reproduce_with(t, c, &SolveOptions::default())
}

/// [`reproduce_from_config`] with explicit solver limits.
pub fn reproduce_with(t: &PuzzleTemplate, c: &Config, opts: &SolveOptions) -> Result<PuzzleInstance> {
    let mode = Mode::Replay {
        cfg: c,
        redraw: BTreeSet::new(),
    };
    let built = build(t, mode, None, opts)?;
    Ok(finish(t, built, 0))
}

/// A replayed instance with the constraints and models behind it.
pub struct Replay {
    pub instance: PuzzleInstance,
    /// Environment after answering, with every symbol and variable bound.
    pub env: Env,
    /// Final constraint set, post-generation conditions included.
    pub constraints: ConstraintSet,
    pub models: Vec<Rc<Model>>,
}

/// [`reproduce_from_config`] keeping the evaluation state, for independent checkers.
pub fn replay_parts(t: &PuzzleTemplate, c: &Config) -> Result<Replay> {
    let mode = Mode::Replay {
        cfg: c,
        redraw: BTreeSet::new(),
    };
    let (built, parts) = build_parts(t, mode, None, &SolveOptions::default())?;
    Ok(Replay {
        instance: finish(t, built, 0),
        env: parts.env,
        constraints: parts.constraints,
        models: parts.models,
    })
}

/// Outcome for one query of a seed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCheck {
    pub query: String,
    pub expected: String,
    /// `None` when the query produced no answer.
    pub computed: Option<String>,
    pub pass: bool,
}

/// Report of [`validate_seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub checks: Vec<QueryCheck>,
    /// Replay failure, if any.
    pub error: Option<String>,
}

/// Replay a seed config and grade each computed answer against the author's gold.
pub fn validate_seed(t: &PuzzleTemplate, c: &Config, gold: &BTreeMap<String, String>) -> ValidationReport {
    let inst = match reproduce_from_config(t, c) {
        Ok(i) => i,
        Err(e) => {
            return ValidationReport {
                pass: false,
                checks: gold
                    .iter()
                    .map(|(q, g)| QueryCheck {
                        query: q.clone(),
                        expected: g.clone(),
                        computed: None,
                        pass: false,
                    })
                    .collect(),
                error: Some(format!("{}: {e}", e.class())),
            }
        }
    };
    let mut checks = Vec::new();
    for (q, g) in gold {
        let answer = inst.answers.iter().find(|a| &a.query_name == q);
        checks.push(QueryCheck {
            query: q.clone(),
            expected: g.clone(),
            computed: answer.map(|a| a.rendered.clone()),
            pass: answer.is_some_and(|a| qa::grade_answer(g, a).correct),
        });
    }
    for a in &inst.answers {
        if !gold.contains_key(&a.query_name) {
            checks.push(QueryCheck {
                query: a.query_name.clone(),
                expected: String::new(),
                computed: Some(a.rendered.clone()),
                pass: false,
            });
        }
    }
    ValidationReport {
        pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
        checks,
        error: None,
    }
}

/// The template with every descriptive text blanked, as YAML.
fn skeleton(t: &PuzzleTemplate) -> Result<String> {
    let blank = Template::parse("")?;
    let mut s = t.clone();
    s.id = String::new();
    s.desc = blank.clone();
    for sym in &mut s.symbols {
        match &mut sym.kind {
            SymbolKind::Defined { desc, .. } => desc.iter_mut().for_each(|d| *d = blank.clone()),
            SymbolKind::Derived { desc, .. } => {
                if let Some(d) = desc {
                    *d = blank.clone();
                }
            }
        }
    }
    let blank_cond = |c: &mut ConditionDecl| {
        if let Some(d) = &mut c.desc {
            *d = blank.clone();
        }
    };
    s.conditions.iter_mut().for_each(blank_cond);
    if let Some(p) = &mut s.post_generation {
        p.conditions.iter_mut().for_each(blank_cond);
    }
    for q in &mut s.queries {
        q.desc = blank.clone();
        match &mut q.kind {
            QueryKind::Open { ans_text, .. } => *ans_text = AnsText::Template(blank.clone()),
            QueryKind::Selection { templates, .. } => templates.iter_mut().for_each(|o| o.opt_text = blank.clone()),
        }
    }
    Ok(serialize_spec(&s))
}

/// Render a config under a text-variant spec, redrawing the `randomize` variables.
pub fn rephrase(t_orig: &PuzzleTemplate, t_new: &PuzzleTemplate, c: &Config, randomize: &[String], seed: u64) -> Result<PuzzleInstance> {
    let (a, b) = (skeleton(t_orig)?, skeleton(t_new)?);
    if a != b {
        let line = a
            .lines()
            .zip(b.lines())
            .find(|(x, y)| x != y)
            .map_or_else(|| "documents differ in length".to_string(), |(x, y)| format!("`{}` vs `{}`", x.trim(), y.trim()));
        return Err(Error::StructuralMismatch(line));
    }
    for r in randomize {
        if t_new.variable(r).is_none() {
            return Err(shape_error(format!("cannot randomize unknown variable `{r}`")));
        }
    }
    let mut cfg = c.clone();
    cfg.spec_id = t_new.id.clone();
    let mode = Mode::Replay {
        cfg: &cfg,
        redraw: randomize.iter().cloned().collect(),
    };
    let rng = (!randomize.is_empty()).then(|| RngStream::new(seed, 0));
    let built = build(t_new, mode, rng, &SolveOptions::default())?;
    Ok(finish(t_new, built, 0))
}
