//! Subcommand definitions and their execution.

use std::path::{Path, PathBuf};

use bvd_core::diagram::{
    agreement, first_type_diagram_2d, k_order_diagram_2d, raster_diagram, second_type_diagram_2d,
    weighted_first_type_diagram_2d, Agreement, RasterLabels, RasterMode,
};
use bvd_core::divergence::symmetrized_divergence;
use bvd_core::exp_family::{kl_divergence, ExponentialFamily};
use bvd_core::planar::{Point2, Rect};
use bvd_core::sampling::{bregman_kmeans, eps_net_with_limit, lloyd, DomainPolygon, KMeansInit, LloydOptions, SiteInit};
use bvd_core::triangulation::{bregman_delaunay_2d, geodesic_triangulation_2d, Triangulation};
use bvd_core::Generator;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::io::{
    read_points_csv, render_ppm, render_svg, to_json, to_planar, write_text, DiagramJson, EdgeCurve, Figure,
    Provenance, TriangulationJson, SCHEMA_VERSION,
};
use crate::{selftest, CliError, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "bvd", version, about = "Bregman Voronoi diagrams, triangulations and samplings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact clipped 2D diagram of the sites in a CSV file.
    Diagram(DiagramArgs),
    /// Bregman Delaunay or geodesic triangulation of the sites.
    Triangulate(TriangulateArgs),
    /// Brute-force pixel labeling of the sites.
    Raster(RasterArgs),
    /// Lloyd quantization of a rectangular domain.
    Lloyd(LloydArgs),
    /// Bregman k-means clustering of a point file (any dimension).
    Kmeans(KMeansArgs),
    /// Greedy epsilon-net of a rectangular domain.
    Epsnet(EpsNetArgs),
    /// KL divergence between two members of an exponential family.
    Kl(KlArgs),
    /// Divergence between two points.
    Divergence(DivergenceArgs),
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct Output {
    /// JSON output path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG figure path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagramType {
    First,
    Second,
    Weighted,
    KOrder,
}

#[derive(Debug, Args)]
pub struct DiagramArgs {
    /// Generator, e.g. `shannon`, `norm_like:3` or `mahalanobis:2,0.5,0.5,1`.
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long = "type", value_enum, default_value = "first")]
    pub kind: DiagramType,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Clip rectangle `x0,y0,x1,y1`.
    #[arg(long, value_parser = parse_rect)]
    pub clip: Rect,
    /// Additive weights for `--type weighted`, one per site.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Vec<f64>,
    /// Order for `--type k-order`.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Samples per mapped edge for `--type second`.
    #[arg(long, default_value_t = 32)]
    pub edge_samples: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TriangulationType {
    Delaunay,
    Geodesic,
}

#[derive(Debug, Args)]
pub struct TriangulateArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long, value_enum, default_value = "delaunay")]
    pub kind: TriangulationType,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Samples per drawn edge curve.
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Also build the other kind and report edges found by only one of them.
    #[arg(long)]
    pub compare: bool,
    /// Draw the first-type diagram under the edges; needs `--clip`.
    #[arg(long)]
    pub overlay: bool,
    /// Figure rectangle; defaults to the sites' padded bounding box.
    #[arg(long, value_parser = parse_rect)]
    pub clip: Option<Rect>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RasterType {
    First,
    Second,
    Symmetrized,
    Weighted,
    KOrder,
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long = "type", value_enum, default_value = "first")]
    pub kind: RasterType,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_rect)]
    pub clip: Rect,
    /// Pixels per side.
    #[arg(long, default_value_t = 512)]
    pub resolution: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Compare against the exact diagram and report the agreement.
    #[arg(long)]
    pub check: bool,
    /// PPM image of the labels.
    #[arg(long)]
    pub ppm: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct LloydArgs {
    #[arg(long = "gen")]
    pub generator: String,
    /// Domain rectangle `x0,y0,x1,y1`.
    #[arg(long, value_parser = parse_rect)]
    pub clip: Rect,
    /// Initial sites; otherwise `--k` seeded random sites.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct KMeansArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EpsNetArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long, value_parser = parse_rect)]
    pub clip: Rect,
    #[arg(long)]
    pub epsilon: f64,
    /// Half-width of the box around each domain vertex that must stay in the generator domain.
    #[arg(long, default_value_t = 0.0)]
    pub clearance: f64,
    /// Initial points; defaults to the domain center.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Give up (exit 3) once the net would exceed this many points.
    #[arg(long, default_value_t = 100_000)]
    pub max_points: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// bernoulli, poisson, normal or laplacian.
    #[arg(long)]
    pub family: String,
    /// Source parameters of p, e.g. `0.3` or `mu,sigma2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub q: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub q: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected x0,y0,x1,y1, got `{s}`"))?;
    match v.as_slice() {
        [x0, y0, x1, y1] => Rect::new(*x0, *y0, *x1, *y1).map_err(|e| e.to_string()),
        _ => Err(format!("expected 4 numbers, got {}", v.len())),
    }
}

struct Ctx {
    provenance: Provenance,
}

impl Ctx {
    fn emit<T: Serialize>(&self, out: Option<&Path>, value: &T) -> Result<(), CliError> {
        let text = to_json(value)?;
        match out {
            Some(p) => write_text(p, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn with_seed(&self, seed: u64) -> Provenance {
        Provenance { seed: Some(seed), ..self.provenance.clone() }
    }
}

pub fn execute(cli: Cli, mut command_line: Vec<String>) -> Result<i32, CliError> {
    // The program path varies between installs; record the tool name instead.
    if let Some(first) = command_line.first_mut() {
        *first = "bvd".to_string();
    }
    let ctx = Ctx { provenance: Provenance { command: command_line, seed: None } };
    match cli.command {
        Command::Diagram(a) => diagram(&ctx, a),
        Command::Triangulate(a) => triangulate(&ctx, a),
        Command::Raster(a) => raster(&ctx, a),
        Command::Lloyd(a) => run_lloyd(&ctx, a),
        Command::Kmeans(a) => kmeans(&ctx, a),
        Command::Epsnet(a) => epsnet(&ctx, a),
        Command::Kl(a) => kl(&ctx, a),
        Command::Divergence(a) => divergence(&ctx, a),
        Command::Selftest => return Ok(selftest::run()),
    }?;
    Ok(EXIT_OK)
}

fn planar_input(path: &Path, spec: &str) -> Result<(Generator, Vec<Point2>), CliError> {
    let sites = to_planar(&read_points_csv(path)?)?;
    Ok((Generator::by_name(spec, 2)?, sites))
}

fn check_weights(weights: &[f64], n: usize) -> Result<(), CliError> {
    if weights.len() != n {
        return Err(CliError::Validation(format!("--weights needs {n} values, got {}", weights.len())));
    }
    Ok(())
}

fn write_svg(path: Option<&Path>, clip: Rect, fig: &Figure) -> Result<(), CliError> {
    match path {
        Some(p) => write_text(p, &render_svg(clip, fig)),
        None => Ok(()),
    }
}

fn diagram(ctx: &Ctx, a: DiagramArgs) -> Result<(), CliError> {
    let (gen, sites) = planar_input(&a.input, &a.generator)?;
    let mut d = match a.kind {
        DiagramType::First => first_type_diagram_2d(&gen, &sites, &a.clip)?,
        DiagramType::Second => second_type_diagram_2d(&gen, &sites, &a.clip, a.edge_samples)?,
        DiagramType::Weighted => {
            check_weights(&a.weights, sites.len())?;
            weighted_first_type_diagram_2d(&gen, &sites, &a.weights, &a.clip)?
        }
        DiagramType::KOrder => k_order_diagram_2d(&gen, &sites, a.k, &a.clip)?,
    };
    d.generator = a.generator.clone();
    write_svg(a.output.svg.as_deref(), a.clip, &Figure { diagram: Some(&d), curves: None, sites: &sites })?;
    ctx.emit(a.output.out.as_deref(), &DiagramJson { version: SCHEMA_VERSION.into(), provenance: ctx.provenance.clone(), diagram: d })
}

/// Bounding box of the points grown by 5% on each side.
fn padded_bbox(pts: &[Point2]) -> Result<Rect, CliError> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let pad = [0.05 * (hi[0] - lo[0]).max(1e-9), 0.05 * (hi[1] - lo[1]).max(1e-9)];
    Ok(Rect::new(lo[0] - pad[0], lo[1] - pad[1], hi[0] + pad[0], hi[1] + pad[1])?)
}

#[derive(Serialize)]
struct Comparison {
    other_kind: String,
    only_in_this: Vec<(usize, usize)>,
    only_in_other: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct TriangulateOutput {
    #[serde(flatten)]
    doc: TriangulationJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn build_triangulation(gen: &Generator, sites: &[Point2], kind: TriangulationType) -> Result<Triangulation, CliError> {
    Ok(match kind {
        TriangulationType::Delaunay => bregman_delaunay_2d(gen, sites)?,
        TriangulationType::Geodesic => geodesic_triangulation_2d(gen, sites)?,
    })
}

fn triangulate(ctx: &Ctx, a: TriangulateArgs) -> Result<(), CliError> {
    let (gen, sites) = planar_input(&a.input, &a.generator)?;
    let mut tri = build_triangulation(&gen, &sites, a.kind)?;
    tri.generator = a.generator.clone();
    let curves: Vec<EdgeCurve> = tri
        .edge_curves(&gen, a.samples)?
        .into_iter()
        .map(|((i, j), points)| EdgeCurve { edge: [i, j], points })
        .collect();
    let comparison = if a.compare {
        let other_kind = match a.kind {
            TriangulationType::Delaunay => TriangulationType::Geodesic,
            TriangulationType::Geodesic => TriangulationType::Delaunay,
        };
        let other = build_triangulation(&gen, &sites, other_kind)?.edges();
        let mine = tri.edges();
        Some(Comparison {
            other_kind: format!("{other_kind:?}").to_lowercase(),
            only_in_this: mine.difference(&other).copied().collect(),
            only_in_other: other.difference(&mine).copied().collect(),
        })
    } else {
        None
    };
    if a.overlay && a.clip.is_none() {
        return Err(CliError::Validation("--overlay needs --clip".into()));
    }
    let clip = match a.clip {
        Some(c) => c,
        None => padded_bbox(&sites)?,
    };
    let under = if a.overlay && a.output.svg.is_some() { Some(first_type_diagram_2d(&gen, &sites, &clip)?) } else { None };
    write_svg(a.output.svg.as_deref(), clip, &Figure { diagram: under.as_ref(), curves: Some(&curves), sites: &sites })?;
    let doc = TriangulationJson {
        version: SCHEMA_VERSION.into(),
        provenance: ctx.provenance.clone(),
        triangulation: tri,
        edge_curves: curves,
    };
    ctx.emit(a.output.out.as_deref(), &TriangulateOutput { doc, comparison })
}

#[derive(Serialize)]
struct RasterOutput<'a> {
    version: &'static str,
    provenance: &'a Provenance,
    generator: &'a str,
    sites: &'a [Point2],
    #[serde(flatten)]
    labels: &'a RasterLabels,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<AgreementJson>,
}

#[derive(Serialize)]
struct AgreementJson {
    compared: usize,
    agreeing: usize,
    excluded: usize,
    fraction: f64,
}

impl From<Agreement> for AgreementJson {
    fn from(a: Agreement) -> Self {
        Self { compared: a.compared, agreeing: a.agreeing, excluded: a.excluded, fraction: a.fraction() }
    }
}

fn raster(ctx: &Ctx, a: RasterArgs) -> Result<(), CliError> {
    let (gen, sites) = planar_input(&a.input, &a.generator)?;
    if matches!(a.kind, RasterType::Weighted) {
        check_weights(&a.weights, sites.len())?;
    }
    let mode = match a.kind {
        RasterType::First => RasterMode::First,
        RasterType::Second => RasterMode::Second,
        RasterType::Symmetrized => RasterMode::Symmetrized,
        RasterType::Weighted => RasterMode::Weighted(a.weights.clone()),
        RasterType::KOrder => RasterMode::KOrder(a.k),
    };
    let labels = raster_diagram(&gen, &sites, &mode, &a.clip, a.resolution)?;
    let exact = if a.check {
        Some(match a.kind {
            RasterType::First => first_type_diagram_2d(&gen, &sites, &a.clip)?,
            RasterType::Second => second_type_diagram_2d(&gen, &sites, &a.clip, 32)?,
            RasterType::Weighted => weighted_first_type_diagram_2d(&gen, &sites, &a.weights, &a.clip)?,
            RasterType::KOrder => k_order_diagram_2d(&gen, &sites, a.k, &a.clip)?,
            RasterType::Symmetrized => {
                return Err(CliError::Validation("--check has no exact diagram for the symmetrized type".into()))
            }
        })
    } else {
        None
    };
    let agreement = exact.as_ref().map(|d| agreement(d, &labels)).transpose()?.map(AgreementJson::from);
    if let Some(p) = &a.ppm {
        std::fs::write(p, render_ppm(&labels)).map_err(|e| CliError::io(p, e))?;
    }
    if a.output.svg.is_some() {
        if matches!(a.kind, RasterType::KOrder) {
            return Err(CliError::Validation("--svg is not available for k-order rasters; use `diagram --type k-order`".into()));
        }
        let traced = labels.to_planar_diagram(&a.generator, &sites);
        write_svg(a.output.svg.as_deref(), a.clip, &Figure { diagram: Some(&traced), curves: None, sites: &sites })?;
    }
    ctx.emit(
        a.output.out.as_deref(),
        &RasterOutput {
            version: SCHEMA_VERSION,
            provenance: &ctx.provenance,
            generator: &a.generator,
            sites: &sites,
            labels: &labels,
            agreement,
        },
    )
}

fn run_lloyd(ctx: &Ctx, a: LloydArgs) -> Result<(), CliError> {
    let gen = Generator::by_name(&a.generator, 2)?;
    let domain = DomainPolygon::from_rect(&a.clip);
    let init = match &a.input {
        Some(p) => SiteInit::Sites(to_planar(&read_points_csv(p)?)?),
        None => SiteInit::Seeded { k: a.k, seed: a.seed },
    };
    let opts = LloydOptions { grid: a.grid, max_iter: a.max_iter, tol: a.tol };
    let run = lloyd(&gen, &domain, &init, None, &opts)?;
    if a.output.svg.is_some() {
        let d = first_type_diagram_2d(&gen, &run.sites, &a.clip)?;
        write_svg(a.output.svg.as_deref(), a.clip, &Figure { diagram: Some(&d), curves: None, sites: &run.sites })?;
    }
    let provenance = if a.input.is_some() { ctx.provenance.clone() } else { ctx.with_seed(a.seed) };
    ctx.emit(
        a.output.out.as_deref(),
        &json!({
            "version": SCHEMA_VERSION,
            "provenance": provenance,
            "generator": a.generator,
            "domain": a.clip,
            "sites": run.sites,
            "trace": run.trace,
            "reseeded": run.reseeded,
            "converged": run.converged,
        }),
    )
}

fn kmeans(ctx: &Ctx, a: KMeansArgs) -> Result<(), CliError> {
    let data = read_points_csv(&a.input)?;
    let gen = Generator::by_name(&a.generator, data[0].len())?;
    let run = bregman_kmeans(&gen, &data, &KMeansInit::Seeded { k: a.k, seed: a.seed }, a.max_iter)?;
    ctx.emit(
        a.out.as_deref(),
        &json!({
            "version": SCHEMA_VERSION,
            "provenance": ctx.with_seed(a.seed),
            "generator": a.generator,
            "centroids": run.centroids,
            "assignments": run.assignments,
            "trace": run.trace,
            "reseeded": run.reseeded,
            "converged": run.converged,
        }),
    )
}

fn epsnet(ctx: &Ctx, a: EpsNetArgs) -> Result<(), CliError> {
    let gen = Generator::by_name(&a.generator, 2)?;
    let domain = DomainPolygon::from_rect(&a.clip).with_clearance(a.clearance)?;
    let seeds = a.input.as_deref().map(|p| read_points_csv(p).and_then(|v| to_planar(&v))).transpose()?;
    let run = eps_net_with_limit(&gen, &domain, a.epsilon, seeds.as_deref(), a.max_points)?;
    if a.output.svg.is_some() {
        let d = first_type_diagram_2d(&gen, &run.points, &a.clip)?;
        write_svg(a.output.svg.as_deref(), a.clip, &Figure { diagram: Some(&d), curves: None, sites: &run.points })?;
    }
    ctx.emit(
        a.output.out.as_deref(),
        &json!({
            "version": SCHEMA_VERSION,
            "provenance": ctx.provenance,
            "generator": a.generator,
            "domain": a.clip,
            "epsilon": run.epsilon,
            "points": run.points,
            "trace": run.trace,
            "error": run.error,
        }),
    )
}

fn kl(ctx: &Ctx, a: KlArgs) -> Result<(), CliError> {
    let fam = ExponentialFamily::by_name(&a.family)?;
    let tp = fam.natural_from_source(&a.p)?;
    let tq = fam.natural_from_source(&a.q)?;
    let bregman = kl_divergence(&fam, &tp, &tq)?;
    let closed = fam.closed_form_kl_source(&a.p, &a.q)?;
    ctx.emit(
        a.out.as_deref(),
        &json!({
            "version": SCHEMA_VERSION,
            "provenance": ctx.provenance,
            "family": fam.name(),
            "source_parameters": fam.source_names(),
            "p": a.p,
            "q": a.q,
            "theta_p": tp.0,
            "theta_q": tq.0,
            "kl_natural_bregman": bregman,
            "kl_closed_form": closed,
            "abs_diff": (bregman - closed).abs(),
        }),
    )
}

fn divergence(ctx: &Ctx, a: DivergenceArgs) -> Result<(), CliError> {
    if a.p.len() != a.q.len() {
        return Err(CliError::Validation(format!("--p has {} coordinates but --q has {}", a.p.len(), a.q.len())));
    }
    let gen = Generator::by_name(&a.generator, a.p.len())?;
    let d = gen.divergence(&a.p, &a.q)?;
    let reverse = gen.divergence(&a.q, &a.p)?;
    let dual = gen.dual()?;
    let dual_d = dual.divergence(&gen.gradient(&a.q)?, &gen.gradient(&a.p)?)?;
    ctx.emit(
        a.out.as_deref(),
        &json!({
            "version": SCHEMA_VERSION,
            "provenance": ctx.provenance,
            "generator": a.generator,
            "p": a.p,
            "q": a.q,
            "divergence": d,
            "reverse": reverse,
            "symmetrized": symmetrized_divergence(&gen, &a.p, &a.q)?,
            "dual_divergence": dual_d,
        }),
    )
}
