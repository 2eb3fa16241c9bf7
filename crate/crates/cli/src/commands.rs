use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use timeavg::autos::{self, C2Classification, EscapeWitnesses, FinitenessReport};
use timeavg::averaging::{
    build_siegel_weights, certify, refute_global, Certificate, CertifyOptions, NormTrace,
    SiegelOptions, Verdict, WeightSequence,
};
use timeavg::dynamics::{
    classify_point, component_chart, default_chart_box, green_value_budget, level_curve, ChartBox,
    ChartOptions, ComponentChart, GreensEstimate, PointClass,
};
use timeavg::monodromy::{choose_base_point, monodromy_data, LoopPath};
use timeavg::permgroup::{is_full_tree_aut, Perm, PermGroup};
use timeavg::polycore::{critical_data, CriticalValue};
use timeavg::{ComplexPoly, Error, C64};

use crate::{provenance_line, side_path, CommandKind, Envelope, RunConfig, EXIT_INCONCLUSIVE};

/// What a run produced: the JSON document, side files and exit status.
pub struct Outcome {
    pub json: String,
    pub side_files: Vec<(PathBuf, Vec<u8>)>,
    pub exit: i32,
}

type Res<T> = Result<T, Error>;

pub fn run(config: &RunConfig) -> Res<Outcome> {
    config.validate()?;
    match config.command {
        CommandKind::Img => img(config),
        CommandKind::Certify => cmd_certify(config),
        CommandKind::RefuteGlobal => cmd_refute(config),
        CommandKind::SiegelWeights => siegel(config),
        CommandKind::Green => green(config),
        CommandKind::Chart => chart(config),
        CommandKind::ClassifyAuto => classify_auto(config),
    }
}

fn poly(config: &RunConfig) -> &ComplexPoly {
    config.poly.as_ref().expect("validated")
}

fn point(config: &RunConfig) -> Res<C64> {
    config
        .point
        .ok_or_else(|| Error::InvalidInput("--point is required".into()))
}

fn envelope<T: Serialize>(config: &RunConfig, result: T) -> String {
    let mut s =
        serde_json::to_string_pretty(&Envelope::new(config, result)).expect("result serializes");
    s.push('\n');
    s
}

fn csv(config: &RunConfig, header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = format!("# {}\n{header}\n", provenance_line(config));
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

fn side(config: &RunConfig, ext: &str, bytes: Vec<u8>) -> Option<(PathBuf, Vec<u8>)> {
    config.out.as_ref().map(|o| (side_path(o, ext), bytes))
}

fn loops_csv(config: &RunConfig, loops: &[(String, &LoopPath)]) -> Vec<u8> {
    let rows = loops.iter().flat_map(|(name, l)| {
        l.waypoints
            .iter()
            .enumerate()
            .map(move |(i, z)| format!("{name},{i},{:e},{:e}", z.re, z.im))
    });
    csv(config, "loop,index,re,im", rows)
}

fn trace_csv(config: &RunConfig, trace: &NormTrace) -> Vec<u8> {
    let rows = trace.entries.iter().map(|e| {
        format!(
            "{},{},{:e},{:e},{:e},{:e}",
            e.group, e.index, e.sup_norm, e.centered_norm, e.median.re, e.median.im
        )
    });
    csv(
        config,
        "group,index,sup_norm,centered_norm,median_re,median_im",
        rows,
    )
}

fn weights_csv(config: &RunConfig, w: &WeightSequence) -> Vec<u8> {
    let rows = w
        .entries
        .iter()
        .map(|e| format!("{},{:e},{:e}", e.index, e.weight.re, e.weight.im));
    csv(config, "index,weight_re,weight_im", rows)
}

#[derive(Serialize)]
struct Generator {
    critical_value: Option<C64>,
    perm: Perm,
    cycle_type: Vec<usize>,
}

#[derive(Serialize)]
struct ImgReport {
    degree: usize,
    level: usize,
    base: C64,
    critical_values: Vec<CriticalValue>,
    max_cardinality: bool,
    generators: Vec<Generator>,
    infinity: Perm,
    infinity_is_full_cycle: bool,
    planar_product_matches: bool,
    transitive: bool,
    order: String,
    full_tree_aut: bool,
}

fn img(config: &RunConfig) -> Res<Outcome> {
    let f = poly(config);
    let n = config.level;
    let d = f.degree();
    if d < 2 {
        return Err(Error::InvalidInput("img needs degree >= 2".into()));
    }
    let base = match config.point {
        Some(p) => p,
        None => choose_base_point(f, n, C64::new(0.0, 0.0), 0.5, |_| true)?,
    };
    let crit = critical_data(f, n)?;
    let data = monodromy_data(f, n, base)?;
    let gens = data.generators();
    let group = PermGroup::new(data.tree.level(n).len(), gens)?;
    let generators = data
        .lollipops
        .iter()
        .zip(&data.lifts)
        .map(|(l, t)| Generator {
            critical_value: match l.kind {
                timeavg::monodromy::LoopKind::Lollipop { value, .. } => Some(value),
                _ => None,
            },
            perm: t.perm.clone(),
            cycle_type: t.perm.cycle_type(),
        })
        .collect();
    let report = ImgReport {
        degree: d,
        level: n,
        base,
        critical_values: crit.critical_values.clone(),
        max_cardinality: crit.max_cardinality,
        generators,
        infinity: data.infinity_lift.perm.clone(),
        infinity_is_full_cycle: data.infinity_lift.perm.is_full_cycle(),
        planar_product_matches: data.planar_product() == data.infinity_lift.perm,
        transitive: group.is_transitive(),
        order: group.order().to_string(),
        full_tree_aut: is_full_tree_aut(&group, d, n)?,
    };
    let mut loops: Vec<(String, &LoopPath)> = data
        .lollipops
        .iter()
        .enumerate()
        .map(|(i, l)| (format!("g{i}"), l))
        .collect();
    loops.push(("infinity".into(), &data.infinity));
    let side_files = side(config, "loops.csv", loops_csv(config, &loops))
        .into_iter()
        .collect();
    Ok(Outcome {
        json: envelope(config, report),
        side_files,
        exit: 0,
    })
}

fn certify_options(config: &RunConfig) -> CertifyOptions {
    let b = &config.budgets;
    CertifyOptions {
        chart_resolution: b.resolution,
        chart_max_iter: b.max_iter,
        guard_pixels: config.tolerances.guard,
        base_offset: config.tolerances.offset,
        closure_cap: b.closure,
        siegel_radius: config.radius,
        siegel_groups: b.groups,
        scan_horizon: b.scan,
    }
}

fn certificate_outcome(config: &RunConfig, cert: Certificate) -> Outcome {
    let mut side_files = Vec::new();
    if !cert.witnesses.norm_trace.is_empty() {
        let trace = NormTrace {
            grid: timeavg::averaging::SampleGrid::Points { points: Vec::new() },
            entries: cert.witnesses.norm_trace.clone(),
        };
        side_files.extend(side(config, "trace.csv", trace_csv(config, &trace)));
    }
    if let Verdict::TimeAverageExists { weights } = &cert.verdict {
        side_files.extend(side(config, "weights.csv", weights_csv(config, weights)));
    }
    let exit = if matches!(cert.verdict, Verdict::Inconclusive { .. }) {
        EXIT_INCONCLUSIVE
    } else {
        0
    };
    Outcome {
        json: envelope(config, cert),
        side_files,
        exit,
    }
}

fn cmd_certify(config: &RunConfig) -> Res<Outcome> {
    let cert = certify(
        poly(config),
        point(config)?,
        config.level,
        &certify_options(config),
    )?;
    Ok(certificate_outcome(config, cert))
}

fn cmd_refute(config: &RunConfig) -> Res<Outcome> {
    let cert = refute_global(
        poly(config),
        config.level,
        config.budgets.trials,
        config.seed,
    )?;
    Ok(certificate_outcome(config, cert))
}

#[derive(Serialize)]
struct SiegelReport {
    weights: WeightSequence,
    trace: NormTrace,
}

fn siegel(config: &RunConfig) -> Res<Outcome> {
    let b = &config.budgets;
    let opts = SiegelOptions {
        scan_horizon: b.scan,
        chart_resolution: b.resolution,
        chart_max_iter: b.max_iter,
        ..SiegelOptions::default()
    };
    let center = config.point.unwrap_or(C64::new(0.0, 0.0));
    let (weights, trace) =
        build_siegel_weights(poly(config), center, config.radius, b.groups, &opts)?;
    let side_files = [
        side(config, "trace.csv", trace_csv(config, &trace)),
        side(config, "weights.csv", weights_csv(config, &weights)),
    ]
    .into_iter()
    .flatten()
    .collect();
    Ok(Outcome {
        json: envelope(config, SiegelReport { weights, trace }),
        side_files,
        exit: 0,
    })
}

#[derive(Serialize)]
struct GreenReport {
    point: Option<C64>,
    estimate: Option<GreensEstimate>,
    level: Option<f64>,
    curve_points: usize,
}

fn green(config: &RunConfig) -> Res<Outcome> {
    let f = poly(config);
    if config.point.is_none() && config.level_curve.is_none() {
        return Err(Error::InvalidInput(
            "green needs --point or --level-curve".into(),
        ));
    }
    let estimate = match config.point {
        Some(z) => Some(green_value_budget(
            f,
            z,
            config.tolerances.green,
            config.budgets.iterations,
        )?),
        None => None,
    };
    let mut side_files = Vec::new();
    let mut curve_points = 0;
    if let Some(level) = config.level_curve {
        let curve = level_curve(f, level, config.budgets.rays)?;
        curve_points = curve.len();
        let rows = curve
            .iter()
            .map(|(z, g)| format!("{:e},{:e},{:e}", z.re, z.im, g));
        side_files.extend(side(config, "curve.csv", csv(config, "re,im,green", rows)));
    }
    let report = GreenReport {
        point: config.point,
        estimate,
        level: config.level_curve,
        curve_points,
    };
    Ok(Outcome {
        json: envelope(config, report),
        side_files,
        exit: 0,
    })
}

#[derive(Serialize)]
struct ChartReport {
    chart: ComponentChart,
    point: Option<C64>,
    point_class: Option<PointClass>,
}

fn chart(config: &RunConfig) -> Res<Outcome> {
    let f = poly(config);
    let bounds = match config.chart_box {
        Some([a, b, c, d]) => ChartBox {
            re_min: a,
            re_max: b,
            im_min: c,
            im_max: d,
        },
        None => default_chart_box(f),
    };
    let res = config.budgets.resolution;
    let opts = ChartOptions {
        max_iter: config.budgets.max_iter,
        ..ChartOptions::default()
    };
    let chart = component_chart(f, bounds, res, res, &opts)?;
    let point_class = match config.point {
        Some(z) => Some(classify_point(f, &chart, z)?),
        None => None,
    };
    let mut pgm = chart.to_pgm();
    // a comment line right after the magic number is valid PGM
    let comment = format!("# {}\n", provenance_line(config));
    pgm.splice(3..3, comment.into_bytes());
    let side_files = side(config, "pgm", pgm).into_iter().collect();
    Ok(Outcome {
        json: envelope(
            config,
            ChartReport {
                chart,
                point: config.point,
                point_class,
            },
        ),
        side_files,
        exit: 0,
    })
}

#[derive(Serialize)]
struct AutoReport {
    dimension: usize,
    degree: u32,
    classification: Option<C2Classification>,
    conclusion: String,
    finiteness: FinitenessReport,
    escape_witnesses: Option<EscapeWitnesses>,
    notes: Vec<String>,
}

fn classify_auto(config: &RunConfig) -> Res<Outcome> {
    let map = config.map.as_ref().expect("validated");
    let mut notes = Vec::new();
    let classification = if map.dim() == 2 {
        Some(autos::classify_c2(map, config.inverse.as_ref())?)
    } else {
        None
    };
    let finiteness =
        autos::locally_finite_relation(map, config.budgets.degree, config.include_identity)?;
    let conclusion = match classification.as_ref().and_then(|c| c.global_average) {
        Some(true) => "global time average exists",
        Some(false) => "no global time average",
        None => match finiteness.verdict {
            autos::Finiteness::LocallyFinite { .. } => "locally finite",
            _ => "undetermined",
        },
    }
    .to_string();
    let mut escape_witnesses = None;
    if classification.as_ref().map(|c| c.class) == Some(autos::C2Class::HenonLike) {
        match config.inverse.as_ref() {
            Some(inv) => match autos::henon_escape_witnesses(
                map,
                inv,
                config.budgets.iterations,
                config.seed,
            ) {
                Ok(w) => escape_witnesses = Some(w),
                Err(e) => notes.push(format!("escape witnesses: {e}")),
            },
            None => notes.push("no inverse supplied; escape witnesses skipped".into()),
        }
    }
    let mut rows = String::new();
    for (n, d) in finiteness.degrees.iter().enumerate() {
        let _ = writeln!(rows, "{},{}", n + 1, d);
    }
    let side_files = side(
        config,
        "degrees.csv",
        csv(config, "n,degree", rows.lines().map(str::to_string)),
    )
    .into_iter()
    .collect();
    let report = AutoReport {
        dimension: map.dim(),
        degree: map.degree(),
        classification,
        conclusion,
        finiteness,
        escape_witnesses,
        notes,
    };
    Ok(Outcome {
        json: envelope(config, report),
        side_files,
        exit: 0,
    })
}
