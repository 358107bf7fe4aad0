//! Expressions compiled against concrete bindings, and their jet evaluator.

use smallvec::SmallVec;
use std::collections::{BTreeMap, HashMap};

use super::function::FunctionInstance;
use super::jet::{taylor, IndexSet, Jet, MultiIndex};
use super::quad::{gauss_legendre_unit, integrate, integrate_extension};
use super::root::find_root;
use super::NumericConfig;
use crate::error::EvalError;
use crate::expr::{differentiate_multi, simplify, Expr, Limit, Name, Node, UnaryFn};

/// Concrete values for the free names of an expression.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    pub params: BTreeMap<String, f64>,
    pub functions: BTreeMap<String, FunctionInstance>,
    /// Lower limits of `base` integrals, keyed by integration variable.
    pub base_points: BTreeMap<String, f64>,
}

type OpId = u32;

/// Pseudo-slot marking a read of the unknown.
const EXTERNAL: u32 = u32::MAX;

/// Longest chain of incremental extensions of one memoised integral before
/// it is recomputed from the lower limit.
const MEMO_LINKS: usize = 32;

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Slot(u32),
    External(u32),
    Func { inst: u32, args: Vec<OpId> },
    Neg(OpId),
    Add(Vec<OpId>),
    Mul(Vec<OpId>),
    Div(OpId, OpId),
    PowConst(OpId, f64),
    Pow(OpId, OpId),
    Unary(UnaryFn, OpId),
    /// `deps` are the slots the integrand reads besides the dummy; `None`
    /// when it reads the unknown, which disables memoisation.
    Integral { slot: u32, integrand: OpId, lower: OpId, upper: OpId, memo: u32, deps: Option<Vec<u32>> },
    RootOf { slot: u32, defining: OpId, slope: OpId, seed: Option<OpId>, cache: u32 },
    Call { params: Vec<u32>, body: OpId, args: Vec<OpId> },
}

/// Compiled form of one or more expressions sharing bindings.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    entries: Vec<OpId>,
    nvars: usize,
    nslots: usize,
    ncache: usize,
    nmemo: usize,
    instances: Vec<FunctionInstance>,
    externals: Vec<MultiIndex>,
}

#[derive(Clone)]
enum Entry {
    Slot(u32),
    Let(usize),
}

type Scope = Vec<(Name, Entry)>;

struct LetDef {
    params: Vec<u32>,
    param_names: Vec<Name>,
    bound: Expr,
    scope: Scope,
    bodies: HashMap<Vec<u8>, OpId>,
}

struct Compiler<'a> {
    ops: Vec<Op>,
    vars: Vec<String>,
    nslots: u32,
    ncache: u32,
    nmemo: u32,
    /// Free slots read by each op, sorted; `EXTERNAL` marks the unknown.
    free: Vec<Vec<u32>>,
    bind: &'a Bindings,
    unknown: Option<&'a str>,
    instances: Vec<FunctionInstance>,
    inst_map: HashMap<(String, Vec<u8>), u32>,
    externals: Vec<MultiIndex>,
    lets: Vec<LetDef>,
}

impl Program {
    /// Compile `exprs` over independent variables `vars`. Applications of
    /// `unknown` (and its derivatives) become external inputs, see
    /// [`Program::externals`].
    pub fn compile(
        exprs: &[&Expr],
        vars: &[&str],
        bind: &Bindings,
        unknown: Option<&str>,
    ) -> Result<Program, EvalError> {
        let mut c = Compiler {
            ops: Vec::new(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            nslots: vars.len() as u32,
            ncache: 0,
            nmemo: 0,
            free: Vec::new(),
            bind,
            unknown,
            instances: Vec::new(),
            inst_map: HashMap::new(),
            externals: Vec::new(),
            lets: Vec::new(),
        };
        let mut entries = Vec::new();
        for e in exprs {
            entries.push(c.compile(e, &Vec::new())?);
        }
        Ok(Program {
            ops: c.ops,
            entries,
            nvars: vars.len(),
            nslots: c.nslots as usize,
            ncache: c.ncache as usize,
            nmemo: c.nmemo as usize,
            instances: c.instances,
            externals: c.externals,
        })
    }

    /// Multi-indices of the unknown's partials, in external-slot order.
    pub fn externals(&self) -> &[MultiIndex] {
        &self.externals
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn op_count(&self) -> usize {
        self.ops.len()
    }
}

impl<'a> Compiler<'a> {
    fn push(&mut self, op: Op) -> OpId {
        let free = self.free_slots(&op);
        self.free.push(free);
        self.ops.push(op);
        (self.ops.len() - 1) as OpId
    }

    fn free_slots(&self, op: &Op) -> Vec<u32> {
        let of = |ids: &[OpId]| -> Vec<u32> { ids.iter().flat_map(|i| self.free[*i as usize].iter().copied()).collect() };
        let without = |v: Vec<u32>, bound: &[u32]| -> Vec<u32> { v.into_iter().filter(|s| !bound.contains(s)).collect() };
        let mut v = match op {
            Op::Const(_) => Vec::new(),
            Op::Slot(s) => vec![*s],
            Op::External(_) => vec![EXTERNAL],
            Op::Neg(a) | Op::PowConst(a, _) | Op::Unary(_, a) => of(&[*a]),
            Op::Div(a, b) | Op::Pow(a, b) => of(&[*a, *b]),
            Op::Add(xs) | Op::Mul(xs) | Op::Func { args: xs, .. } => of(xs),
            Op::Integral {
                slot,
                integrand,
                lower,
                upper,
                ..
            } => {
                let mut v = of(&[*lower, *upper]);
                v.extend(without(of(&[*integrand]), &[*slot]));
                v
            }
            Op::RootOf {
                slot,
                defining,
                slope,
                seed,
                ..
            } => {
                let mut v = seed.map(|s| of(&[s])).unwrap_or_default();
                v.extend(without(of(&[*defining, *slope]), &[*slot]));
                v
            }
            Op::Call { params, body, args } => {
                let mut v = of(args);
                v.extend(without(of(&[*body]), params));
                v
            }
        };
        v.sort_unstable();
        v.dedup();
        v
    }

    fn new_slot(&mut self) -> u32 {
        self.nslots += 1;
        self.nslots - 1
    }

    fn instance(&mut self, name: &str, derivs: &[u8]) -> Result<u32, EvalError> {
        let key = (name.to_string(), derivs.to_vec());
        if let Some(&i) = self.inst_map.get(&key) {
            return Ok(i);
        }
        let f = self
            .bind
            .functions
            .get(name)
            .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
        if f.arity != derivs.len() {
            return Err(EvalError::Invalid(format!(
                "function {name} has arity {} but is applied to {} argument(s)",
                f.arity,
                derivs.len()
            )));
        }
        self.instances.push(f.derivative(derivs));
        let i = (self.instances.len() - 1) as u32;
        self.inst_map.insert(key, i);
        Ok(i)
    }

    fn lookup(scope: &Scope, n: &str) -> Option<Entry> {
        scope.iter().rev().find(|(k, _)| &**k == n).map(|(_, e)| e.clone())
    }

    fn compile_all(&mut self, es: &[Expr], scope: &Scope) -> Result<Vec<OpId>, EvalError> {
        es.iter().map(|e| self.compile(e, scope)).collect()
    }

    fn let_body(&mut self, id: usize, derivs: &[u8]) -> Result<OpId, EvalError> {
        if let Some(&b) = self.lets[id].bodies.get(derivs) {
            return Ok(b);
        }
        let def = &self.lets[id];
        let mut order: Vec<&str> = Vec::new();
        for (p, &k) in def.param_names.iter().zip(derivs) {
            for _ in 0..k {
                order.push(p);
            }
        }
        let expr = if order.is_empty() {
            def.bound.clone()
        } else {
            differentiate_multi(&def.bound, &order)
        };
        let mut scope = def.scope.clone();
        for (n, &s) in def.param_names.iter().zip(&def.params) {
            scope.push((n.clone(), Entry::Slot(s)));
        }
        let body = self.compile(&expr, &scope)?;
        self.lets[id].bodies.insert(derivs.to_vec(), body);
        Ok(body)
    }

    fn compile(&mut self, e: &Expr, scope: &Scope) -> Result<OpId, EvalError> {
        let op = match e.node() {
            Node::Const(v) => Op::Const(*v),
            Node::Var(n) => match Self::lookup(scope, n) {
                Some(Entry::Slot(s)) => Op::Slot(s),
                Some(Entry::Let(_)) => return Err(EvalError::Invalid(format!("{n} is a function"))),
                None => match self.vars.iter().position(|v| v == &**n) {
                    Some(i) => Op::Slot(i as u32),
                    None => return Err(EvalError::Unbound(n.to_string())),
                },
            },
            Node::Param(n) => match self.bind.params.get(&**n) {
                Some(v) => Op::Const(*v),
                None => return Err(EvalError::Unbound(n.to_string())),
            },
            Node::Func { name, derivs, args } => {
                if let Some(Entry::Let(id)) = Self::lookup(scope, name) {
                    let args = self.compile_all(args, scope)?;
                    let body = self.let_body(id, derivs)?;
                    Op::Call {
                        params: self.lets[id].params.clone(),
                        body,
                        args,
                    }
                } else if self.unknown == Some(&**name) {
                    let m = MultiIndex::from_counts(derivs);
                    let i = match self.externals.iter().position(|x| *x == m) {
                        Some(i) => i,
                        None => {
                            self.externals.push(m);
                            self.externals.len() - 1
                        }
                    };
                    Op::External(i as u32)
                } else {
                    let inst = self.instance(name, derivs)?;
                    let args = self.compile_all(args, scope)?;
                    Op::Func { inst, args }
                }
            }
            Node::Neg(a) => Op::Neg(self.compile(a, scope)?),
            Node::Add(ts) => Op::Add(self.compile_all(ts, scope)?),
            Node::Mul(fs) => Op::Mul(self.compile_all(fs, scope)?),
            Node::Div(a, b) => {
                let a = self.compile(a, scope)?;
                let b = self.compile(b, scope)?;
                Op::Div(a, b)
            }
            Node::Pow(b, x) => {
                let base = self.compile(b, scope)?;
                match simplify(x).as_const() {
                    Some(p) => Op::PowConst(base, p),
                    None => {
                        let ex = self.compile(x, scope)?;
                        Op::Pow(base, ex)
                    }
                }
            }
            Node::Unary(u, a) => Op::Unary(*u, self.compile(a, scope)?),
            Node::Integral {
                dummy,
                integrand,
                lower,
                upper,
            } => {
                let lower = match lower {
                    Limit::Base(k) => match self.bind.base_points.get(&**k) {
                        Some(v) => self.push(Op::Const(*v)),
                        None => return Err(EvalError::Unbound(format!("base point for {k}"))),
                    },
                    Limit::At(l) => self.compile(l, scope)?,
                };
                let upper = self.compile(upper, scope)?;
                let slot = self.new_slot();
                let mut inner = scope.clone();
                inner.push((dummy.clone(), Entry::Slot(slot)));
                let integrand = self.compile(integrand, &inner)?;
                let free = &self.free[integrand as usize];
                let deps = (!free.contains(&EXTERNAL)).then(|| free.iter().copied().filter(|&x| x != slot).collect());
                self.nmemo += 1;
                Op::Integral {
                    slot,
                    integrand,
                    lower,
                    upper,
                    memo: self.nmemo - 1,
                    deps,
                }
            }
            Node::RootOf {
                dummy,
                defining,
                seed,
            } => {
                let seed = match seed {
                    Some(s) => Some(self.compile(s, scope)?),
                    None => None,
                };
                let slot = self.new_slot();
                let mut inner = scope.clone();
                inner.push((dummy.clone(), Entry::Slot(slot)));
                let defining_op = self.compile(defining, &inner)?;
                let slope_expr = differentiate_multi(defining, &[&**dummy]);
                let slope = self.compile(&slope_expr, &inner)?;
                let cache = self.ncache;
                self.ncache += 1;
                Op::RootOf {
                    slot,
                    defining: defining_op,
                    slope,
                    seed,
                    cache,
                }
            }
            Node::Let {
                name,
                params,
                bound,
                body,
            } => {
                let slots: Vec<u32> = params.iter().map(|_| self.new_slot()).collect();
                self.lets.push(LetDef {
                    params: slots,
                    param_names: params.clone(),
                    bound: bound.clone(),
                    scope: scope.clone(),
                    bodies: HashMap::new(),
                });
                let id = self.lets.len() - 1;
                let mut inner = scope.clone();
                inner.push((name.clone(), Entry::Let(id)));
                return self.compile(body, &inner);
            }
        };
        let op = self.fold(op);
        Ok(self.push(op))
    }

    /// Replace a pure operation on constants (parameter-only subtrees,
    /// mostly) by its value. Folding happens only when the strictest guard
    /// accepts the evaluation, so no runtime domain check is bypassed.
    fn fold(&self, op: Op) -> Op {
        let children: Vec<OpId> = match &op {
            Op::Neg(a) | Op::PowConst(a, _) | Op::Unary(_, a) => vec![*a],
            Op::Div(a, b) | Op::Pow(a, b) => vec![*a, *b],
            Op::Add(xs) | Op::Mul(xs) => xs.clone(),
            Op::Func { args, .. } => args.clone(),
            _ => return op,
        };
        let mut ops = Vec::with_capacity(children.len() + 1);
        for &c in &children {
            match self.ops[c as usize] {
                Op::Const(v) => ops.push(Op::Const(v)),
                _ => return op,
            }
        }
        let local: Vec<OpId> = (0..children.len() as OpId).collect();
        let remapped = match &op {
            Op::Neg(_) => Op::Neg(0),
            Op::PowConst(_, p) => Op::PowConst(0, *p),
            Op::Unary(u, _) => Op::Unary(*u, 0),
            Op::Div(..) => Op::Div(0, 1),
            Op::Pow(..) => Op::Pow(0, 1),
            Op::Add(_) => Op::Add(local),
            Op::Mul(_) => Op::Mul(local),
            Op::Func { .. } => Op::Func { inst: 0, args: local },
            _ => unreachable!(),
        };
        let instances = match &op {
            Op::Func { inst, .. } => vec![self.instances[*inst as usize].clone()],
            _ => Vec::new(),
        };
        ops.push(remapped);
        let tmp = Program {
            entries: vec![(ops.len() - 1) as OpId],
            ops,
            nvars: 0,
            nslots: 0,
            ncache: 0,
            nmemo: 0,
            instances,
            externals: Vec::new(),
        };
        let mut ev = Evaluator::new(&tmp, NumericConfig::default());
        ev.guard = Guard::STRICT;
        match ev.value(0, &[]) {
            Ok(v) if v.is_finite() => Op::Const(v),
            _ => op,
        }
    }
}

/// Thresholds below which an evaluation is rejected as a domain error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guard {
    /// Smallest admissible denominator magnitude.
    pub denominator: f64,
    /// Smallest admissible Ln/Sqrt argument (and fractional-power base).
    pub argument: f64,
    /// Smallest admissible distance of a Tan argument to a pole.
    pub tan_pole: f64,
}

impl Guard {
    pub const STANDARD: Guard = Guard {
        denominator: 1e-14,
        argument: 1e-14,
        tan_pole: 1e-3,
    };

    /// Used while screening scenarios.
    pub const STRICT: Guard = Guard {
        denominator: 0.1,
        argument: 0.1,
        tan_pole: 0.1,
    };
}

/// Counters collected while evaluating.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalStats {
    pub root_solves: usize,
    /// Largest `|Φ(z)|` accepted by any root solve.
    pub max_root_residual: f64,
    pub integrals: usize,
    pub integrand_calls: usize,
    pub root_iterations: usize,
    pub memo_hits: usize,
}

/// Last value of one integral, with what it was computed under.
#[derive(Debug, Clone)]
struct Memo {
    a: f64,
    b: f64,
    deps: Vec<Jet>,
    set: Vec<MultiIndex>,
    value: Jet,
    links: usize,
}

/// Mutable evaluation context for one program. Holds the RootOf seed cache,
/// so one context should follow one scenario.
pub struct Evaluator<'p> {
    prog: &'p Program,
    pub cfg: NumericConfig,
    pub guard: Guard,
    /// RootOf branch: 0 follows the seed, 1 takes the next root found by the
    /// bracket scan.
    pub branch: usize,
    pub stats: EvalStats,
    slots: Vec<Jet>,
    externals: Vec<Jet>,
    cache: Vec<Option<f64>>,
    memo: Vec<Option<Memo>>,
    nest: usize,
    value_set: IndexSet,
}

impl<'p> Evaluator<'p> {
    pub fn new(prog: &'p Program, cfg: NumericConfig) -> Self {
        Evaluator {
            prog,
            cfg,
            guard: Guard::STANDARD,
            branch: 0,
            stats: EvalStats::default(),
            slots: vec![Jet::constant(0.0); prog.nslots],
            externals: vec![Jet::constant(0.0); prog.externals.len()],
            cache: vec![None; prog.ncache],
            memo: vec![None; prog.nmemo],
            nest: 0,
            value_set: IndexSet::value_only(prog.nvars.max(1)),
        }
    }

    pub fn clear_cache(&mut self) {
        self.cache.iter_mut().for_each(|c| *c = None);
    }

    /// Values of the unknown's partials (in [`Program::externals`] order).
    pub fn set_externals(&mut self, values: &[f64]) {
        for (e, v) in self.externals.iter_mut().zip(values) {
            *e = Jet::constant(*v);
        }
    }

    /// Evaluate entry `entry` at `point` carrying the partials in `set`.
    pub fn eval(&mut self, entry: usize, point: &[f64], set: &IndexSet) -> Result<Jet, EvalError> {
        if point.len() != self.prog.nvars {
            return Err(EvalError::Invalid(format!(
                "expected {} coordinates, got {}",
                self.prog.nvars,
                point.len()
            )));
        }
        for (i, &v) in point.iter().enumerate() {
            self.slots[i] = if set.len() > 1 {
                Jet::variable(set, i, v)
            } else {
                Jet::constant(v)
            };
        }
        self.nest = 0;
        let id = self.prog.entries[entry];
        let r = self.run(id, set)?;
        if !r.is_finite() {
            return Err(EvalError::Domain("non-finite result".into()));
        }
        Ok(r.full(set))
    }

    /// Value only.
    pub fn value(&mut self, entry: usize, point: &[f64]) -> Result<f64, EvalError> {
        let set = self.value_set.clone();
        Ok(self.eval(entry, point, &set)?.value())
    }

    fn run(&mut self, id: OpId, set: &IndexSet) -> Result<Jet, EvalError> {
        let prog = self.prog;
        match &prog.ops[id as usize] {
            Op::Const(v) => Ok(Jet::constant(*v)),
            Op::Slot(s) => {
                let j = &self.slots[*s as usize];
                Ok(if set.len() == 1 { j.projected() } else { j.clone() })
            }
            Op::External(i) => Ok(self.externals[*i as usize].clone()),
            Op::Func { inst, args } => {
                let vals = args.iter().map(|a| self.run(*a, set)).collect::<Result<SmallVec<[Jet; 4]>, _>>()?;
                Ok(prog.instances[*inst as usize].eval_jet(&vals, set))
            }
            Op::Neg(a) => Ok(self.run(*a, set)?.neg()),
            Op::Add(ts) => {
                let mut acc = Jet::constant(0.0);
                for t in ts {
                    let v = self.run(*t, set)?;
                    acc = acc.add(&v);
                }
                Ok(acc)
            }
            Op::Mul(fs) => {
                let mut acc = Jet::constant(1.0);
                for f in fs {
                    let v = self.run(*f, set)?;
                    acc = acc.mul(&v, set);
                }
                Ok(acc)
            }
            Op::Div(a, b) => {
                let num = self.run(*a, set)?;
                let den = self.run(*b, set)?;
                let d0 = den.value();
                if !(d0.abs() >= self.guard.denominator) {
                    return Err(EvalError::Domain(format!("denominator {d0:e}")));
                }
                if den.is_constant() {
                    return Ok(num.scale(1.0 / d0));
                }
                let inv = den.compose(&taylor::powf(d0, -1.0, set.max_degree()), set);
                Ok(num.mul(&inv, set))
            }
            Op::PowConst(b, p) => {
                let base = self.run(*b, set)?;
                self.pow_const(&base, *p, set)
            }
            Op::Pow(b, x) => {
                let base = self.run(*b, set)?;
                let ex = self.run(*x, set)?;
                if ex.is_constant() {
                    return self.pow_const(&base, ex.value(), set);
                }
                let b0 = base.value();
                if !(b0 >= self.guard.argument) {
                    return Err(EvalError::Domain(format!("power base {b0:e} with variable exponent")));
                }
                let lnb = base.compose(&taylor::ln(b0, set.max_degree()), set);
                let arg = lnb.mul(&ex, set);
                Ok(arg.compose(&taylor::exp(arg.value(), set.max_degree()), set))
            }
            Op::Unary(u, a) => {
                let arg = self.run(*a, set)?;
                self.unary(*u, &arg, set)
            }
            Op::Integral {
                slot,
                integrand,
                lower,
                upper,
                memo,
                deps,
            } => self.integral(*slot, *integrand, *lower, *upper, *memo, deps.as_deref(), set),
            Op::RootOf {
                slot,
                defining,
                slope,
                seed,
                cache,
            } => self.root_of(*slot, *defining, *slope, *seed, *cache, set),
            Op::Call { params, body, args } => {
                let vals = args.iter().map(|a| self.run(*a, set)).collect::<Result<SmallVec<[Jet; 4]>, _>>()?;
                for (s, v) in params.iter().zip(vals) {
                    self.slots[*s as usize] = v;
                }
                self.run(*body, set)
            }
        }
    }

    fn pow_const(&self, base: &Jet, p: f64, set: &IndexSet) -> Result<Jet, EvalError> {
        let b0 = base.value();
        let integer = p.fract() == 0.0 && p.abs() < 1e9;
        if integer {
            if p >= 0.0 && base.is_constant() {
                return Ok(Jet::constant(b0.powi(p as i32)));
            }
            if p < 0.0 && !(b0.abs() >= self.guard.denominator) {
                return Err(EvalError::Domain(format!("denominator {b0:e} in negative power")));
            }
            if p == 2.0 {
                return Ok(base.mul(base, set));
            }
        } else if !(b0 >= self.guard.argument) {
            return Err(EvalError::Domain(format!("fractional power of {b0:e}")));
        }
        if base.is_constant() {
            return Ok(Jet::constant(if integer { b0.powi(p as i32) } else { b0.powf(p) }));
        }
        Ok(base.compose(&taylor::powf(b0, p, set.max_degree()), set))
    }

    fn unary(&self, u: UnaryFn, arg: &Jet, set: &IndexSet) -> Result<Jet, EvalError> {
        let x = arg.value();
        let n = set.max_degree();
        if arg.is_constant() {
            return self.unary_scalar(u, x).map(Jet::constant);
        }
        let d = match u {
            UnaryFn::Exp => {
                let d = taylor::exp(x, n);
                if !d[0].is_finite() {
                    return Err(EvalError::Domain(format!("exp overflow at {x:e}")));
                }
                d
            }
            UnaryFn::Ln => {
                if !(x >= self.guard.argument) {
                    return Err(EvalError::Domain(format!("ln of {x:e}")));
                }
                taylor::ln(x, n)
            }
            UnaryFn::Sqrt => {
                if !(x >= self.guard.argument) {
                    return Err(EvalError::Domain(format!("sqrt of {x:e}")));
                }
                taylor::powf(x, 0.5, n)
            }
            UnaryFn::Sin => taylor::sin(x, n),
            UnaryFn::Cos => taylor::cos(x, n),
            UnaryFn::Tan => {
                let k = (x / std::f64::consts::PI - 0.5).round();
                let pole = std::f64::consts::PI * (k + 0.5);
                if !((x - pole).abs() >= self.guard.tan_pole) {
                    return Err(EvalError::Domain(format!("tan near pole at {x:e}")));
                }
                taylor::tan(x, n)
            }
        };
        Ok(arg.compose(&d, set))
    }

    fn unary_scalar(&self, u: UnaryFn, x: f64) -> Result<f64, EvalError> {
        match u {
            UnaryFn::Exp => {
                let e = x.exp();
                if !e.is_finite() {
                    return Err(EvalError::Domain(format!("exp overflow at {x:e}")));
                }
                Ok(e)
            }
            UnaryFn::Ln | UnaryFn::Sqrt if !(x >= self.guard.argument) => {
                Err(EvalError::Domain(format!("{} of {x:e}", if u == UnaryFn::Ln { "ln" } else { "sqrt" })))
            }
            UnaryFn::Ln => Ok(x.ln()),
            UnaryFn::Sqrt => Ok(x.sqrt()),
            UnaryFn::Sin => Ok(x.sin()),
            UnaryFn::Cos => Ok(x.cos()),
            UnaryFn::Tan => {
                let k = (x / std::f64::consts::PI - 0.5).round();
                let pole = std::f64::consts::PI * (k + 0.5);
                if !((x - pole).abs() >= self.guard.tan_pole) {
                    return Err(EvalError::Domain(format!("tan near pole at {x:e}")));
                }
                Ok(x.tan())
            }
        }
    }

    fn integral(
        &mut self,
        slot: u32,
        integrand: OpId,
        lower: OpId,
        upper: OpId,
        memo: u32,
        deps: Option<&[u32]>,
        set: &IndexSet,
    ) -> Result<Jet, EvalError> {
        self.nest += 1;
        if self.nest > self.cfg.nest_limit {
            let n = self.nest;
            self.nest -= 1;
            return Err(EvalError::NestLimitExceeded(n - 1));
        }
        self.stats.integrals += 1;
        let r = self.integral_inner(slot, integrand, lower, upper, memo, deps, set);
        self.nest -= 1;
        r
    }

    fn integral_inner(
        &mut self,
        slot: u32,
        integrand: OpId,
        lower: OpId,
        upper: OpId,
        memo: u32,
        deps: Option<&[u32]>,
        set: &IndexSet,
    ) -> Result<Jet, EvalError> {
        let lo = self.run(lower, set)?;
        let hi = self.run(upper, set)?;
        let (a, b) = (lo.value(), hi.value());
        let s = slot as usize;
        let mut total = match deps {
            Some(deps) => self.memo_integral(memo as usize, deps, s, integrand, a, b, set)?,
            None => self.quad(s, integrand, a, b, set)?,
        };
        if set.len() > 1 {
            if !hi.is_constant() {
                let e = self.endpoint(s, integrand, &hi, set)?;
                total = total.add(&e);
            }
            if !lo.is_constant() {
                let e = self.endpoint(s, integrand, &lo, set)?;
                total = total.sub(&e);
            }
        }
        Ok(total)
    }

    fn quad(&mut self, s: usize, integrand: OpId, a: f64, b: f64, set: &IndexSet) -> Result<Jet, EvalError> {
        let cfg = self.cfg.clone();
        let (v, _) = integrate(
            |xi| {
                self.stats.integrand_calls += 1;
                self.slots[s] = Jet::constant(xi);
                self.run(integrand, set)
            },
            a,
            b,
            &cfg,
        )?;
        Ok(v)
    }

    /// `∫_a^b`, reusing the previous value of the same integral when the
    /// lower limit and every slot the integrand reads are unchanged: only
    /// the stretch between the two upper limits is integrated. Nested
    /// integrals evaluated at successive quadrature nodes and root solves
    /// moving the upper limit both hit this path.
    #[allow(clippy::too_many_arguments)]
    fn memo_integral(
        &mut self,
        m: usize,
        deps: &[u32],
        s: usize,
        integrand: OpId,
        a: f64,
        b: f64,
        set: &IndexSet,
    ) -> Result<Jet, EvalError> {
        let hit = match &self.memo[m] {
            Some(e) => {
                e.a == a
                    && e.links < MEMO_LINKS
                    && (b - e.b).abs() <= (e.b - e.a).abs()
                    && e.set == set.indices()
                    && deps.iter().zip(&e.deps).all(|(d, v)| self.slots[*d as usize] == *v)
            }
            None => false,
        };
        if hit {
            self.stats.memo_hits += 1;
            let e = self.memo[m].take().unwrap();
            let cfg = self.cfg.clone();
            let (d, _) = integrate_extension(
                |xi| {
                    self.stats.integrand_calls += 1;
                    self.slots[s] = Jet::constant(xi);
                    self.run(integrand, set)
                },
                e.b,
                b,
                &cfg,
                &e.value,
            )?;
            let value = e.value.add(&d);
            self.memo[m] = Some(Memo {
                b,
                value: value.clone(),
                links: e.links + 1,
                ..e
            });
            return Ok(value);
        }
        let value = self.quad(s, integrand, a, b, set)?;
        self.memo[m] = Some(Memo {
            a,
            b,
            deps: deps.iter().map(|d| self.slots[*d as usize].clone()).collect(),
            set: set.indices().to_vec(),
            value: value.clone(),
            links: 0,
        });
        Ok(value)
    }

    /// `∫_{u₀}^{u} g = δ ∫₀¹ g(u₀ + sδ) ds` with `δ = u − u₀` nilpotent, so a
    /// short Gauss-Legendre rule is exact.
    fn endpoint(&mut self, s: usize, integrand: OpId, limit: &Jet, set: &IndexSet) -> Result<Jet, EvalError> {
        let u0 = limit.value();
        let mut delta = limit.clone();
        delta.0[0] = 0.0;
        let rule = gauss_legendre_unit(set.max_degree().div_ceil(2));
        let mut acc = Jet::constant(0.0);
        for &(node, w) in rule {
            let mut arg = delta.scale(node);
            arg.0[0] = u0;
            self.slots[s] = arg;
            let g = self.run(integrand, set)?;
            acc.add_scaled(&g, w);
        }
        Ok(acc.mul(&delta, set))
    }

    #[allow(clippy::too_many_arguments)]
    fn root_of(
        &mut self,
        slot: u32,
        defining: OpId,
        slope: OpId,
        seed: Option<OpId>,
        cache: u32,
        set: &IndexSet,
    ) -> Result<Jet, EvalError> {
        let vset = self.value_set.clone();
        let (start, skip) = match self.cache[cache as usize] {
            Some(z) => (z, 0),
            None => {
                let z = match seed {
                    Some(sd) => self.run(sd, &vset)?.value(),
                    None => 0.0,
                };
                (z, self.branch)
            }
        };
        let s = slot as usize;
        let cfg = self.cfg.clone();
        let root = find_root(
            |z| {
                self.stats.root_iterations += 1;
                self.slots[s] = Jet::constant(z);
                let f = self.run(defining, &vset)?.value();
                let d = self.run(slope, &vset)?.value();
                Ok((f, d))
            },
            start,
            skip,
            &cfg,
        )?;
        let (z0, slope0) = (root.z, root.slope);
        self.stats.root_solves += 1;
        self.stats.max_root_residual = self.stats.max_root_residual.max(root.residual);
        self.cache[cache as usize] = Some(z0);
        if set.len() == 1 {
            return Ok(Jet::constant(z0));
        }
        // Frozen-slope Newton on jets gains one order per step.
        let mut z = Jet::constant(z0);
        for _ in 0..=set.max_degree() {
            self.slots[s] = z.clone();
            let phi = self.run(defining, set)?;
            if phi.is_constant() {
                break;
            }
            let mut step = phi.scale(1.0 / slope0);
            step.0[0] = 0.0;
            z = z.sub(&step);
        }
        Ok(z)
    }
}
