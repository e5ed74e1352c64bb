//! Browser bindings for the demo page in `www/`. Every export takes plain
//! numbers or JSON text and returns JSON text; errors become JS exceptions.

use genmakespan::instances::{gen_random, FamilyKind, Payload, SizeProfile};
use genmakespan::rounding::{solve_end_to_end, SolverConfig};
use genmakespan::setsystem::materialize;
use genmakespan::{DiscreteDistribution, GeometryFamily};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
pub struct CurvePoint {
    pub k: f64,
    pub beta: f64,
}

#[derive(Serialize)]
pub struct Curve {
    pub mean: f64,
    pub max: f64,
    pub points: Vec<CurvePoint>,
}

/// `beta_k` of a finite distribution for `k = 2^(e/4)`, `e = 0..=4 * max_log2_k`.
pub fn effective_size_curve_impl(values: &[f64], probs: &[f64], max_log2_k: u32) -> genmakespan::Result<Curve> {
    if values.len() != probs.len() {
        return Err(genmakespan::Error::Argument("values and probabilities differ in length".into()));
    }
    let dist = DiscreteDistribution::from_unsorted(values.iter().copied().zip(probs.iter().copied()).collect())?;
    let mut points = vec![CurvePoint {
        k: 1.0,
        beta: dist.effective_size(1)?,
    }];
    let mut last = 1;
    for e in 1..=4 * max_log2_k.min(60) {
        let k = 2f64.powf(e as f64 / 4.0).round() as u64;
        if k > last {
            points.push(CurvePoint {
                k: k as f64,
                beta: dist.effective_size(k)?,
            });
            last = k;
        }
    }
    Ok(Curve {
        mean: dist.mean(),
        max: dist.max_value(),
        points,
    })
}

#[wasm_bindgen]
pub fn effective_size_curve(values: &[f64], probs: &[f64], max_log2_k: u32) -> Result<String, JsError> {
    let curve = effective_size_curve_impl(values, probs, max_log2_k).map_err(to_js)?;
    serde_json::to_string(&curve).map_err(to_js)
}

#[derive(Serialize)]
pub struct LineSolve {
    pub points: usize,
    pub intervals: Vec<[usize; 2]>,
    pub distributions: Vec<DiscreteDistribution>,
    pub chosen: Vec<usize>,
    pub makespan: f64,
    pub stderr: f64,
    pub winning_guess: Option<f64>,
    pub checks_pass: bool,
}

/// Generates a random line instance and solves it.
pub fn solve_random_line_impl(n: usize, t: usize, seed: u64) -> genmakespan::Result<LineSolve> {
    let file = gen_random(FamilyKind::Line, n, &SizeProfile::default(), t, seed)?;
    let problem = file.to_problem()?;
    let config = SolverConfig {
        inner_samples: 2_000,
        final_samples: 20_000,
        repetitions: 16,
        seed,
        ..SolverConfig::default()
    };
    let solution = solve_end_to_end(&problem, &config)?;
    let Payload::Geometry(GeometryFamily::Line { points, intervals }) = file.payload else {
        unreachable!("line generator returns a line family");
    };
    Ok(LineSolve {
        points,
        intervals,
        distributions: file.distributions,
        chosen: solution.chosen,
        makespan: solution.estimate.mean,
        stderr: solution.estimate.stderr,
        winning_guess: solution.winning_guess,
        checks_pass: solution.report.all_pass(),
    })
}

#[wasm_bindgen]
pub fn solve_random_line(n: usize, t: usize, seed: u64) -> Result<String, JsError> {
    let out = solve_random_line_impl(n, t, seed).map_err(to_js)?;
    serde_json::to_string(&out).map_err(to_js)
}

#[derive(Serialize)]
pub struct RectExtend {
    /// Representative point of every resource (face).
    pub points: Vec<[f64; 2]>,
    /// Tasks containing each resource.
    pub faces: Vec<Vec<usize>>,
    pub safe: Vec<usize>,
    pub covers: Vec<Vec<usize>>,
    pub lambda: usize,
}

/// Materializes rectangles `[x1, y1, x2, y2]` and runs Extend on `dangerous`.
pub fn rect_extend_impl(rects: Vec<[f64; 4]>, dangerous: &[usize]) -> genmakespan::Result<RectExtend> {
    let m = materialize(&GeometryFamily::Rectangles { rects })?;
    let res = m.extender.extend(dangerous)?;
    Ok(RectExtend {
        points: m.points,
        faces: m.sys.resource_lists().to_vec(),
        safe: res.safe,
        covers: res.covers,
        lambda: res.lambda,
    })
}

#[wasm_bindgen]
pub fn rect_extend(rects_json: &str, dangerous: &[usize]) -> Result<String, JsError> {
    let rects: Vec<[f64; 4]> = serde_json::from_str(rects_json).map_err(to_js)?;
    let out = rect_extend_impl(rects, dangerous).map_err(to_js)?;
    serde_json::to_string(&out).map_err(to_js)
}
