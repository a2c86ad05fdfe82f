use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Fixtures {
    dir: TempDir,
}

impl Fixtures {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &str| std::fs::write(dir.path().join(name), body).unwrap();
        write("g1.json", r#"{"E": [[-1, 0], [-4, 0]]}"#);
        write("g2.json", r#"{"E": [[-1, 0], [-2, 0], [-3, 0], [-4, 0]]}"#);
        write("m0.json", r#"{"E": [[-1, 1], [-1, -1]]}"#);
        write(
            "mixed.json",
            r#"{"E": [[-0.5, 0], [-2, 0], [1, 1.5], [1, -1.5]]}"#,
        );
        write("odd.json", r#"{"E": [[-1, 0]]}"#);
        write("bad.json", r#"{"E": [[-1, 0], [-4"#);
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn sg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sg"))
        .args(args)
        .output()
        .unwrap()
}

fn sg_at(curve: &Path, args: &[&str]) -> Output {
    let mut all = vec![args[0], curve.to_str().unwrap()];
    all.extend(&args[1..]);
    sg(&all)
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap();
    row[i].parse().unwrap()
}

#[test]
fn charge_of_the_genus_one_fixture() {
    let fx = Fixtures::new();
    let text = stdout(&sg_at(&fx.path("g1.json"), &["charge", "--type", "+"]));
    let (h, rows) = table(&text);
    assert_eq!(h, ["type", "U1", "n_bar", "max_a_residual"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "+");
    let u1 = column(&h, &rows[0], "U1");
    assert!((u1 + 0.22245286731).abs() < 1e-9);
    assert_eq!(column(&h, &rows[0], "n_bar"), u1);
    assert!(column(&h, &rows[0], "max_a_residual") < 1e-8);
}

#[test]
fn charge_rows_cover_every_component() {
    let fx = Fixtures::new();
    let (h, rows) = table(&stdout(&sg_at(&fx.path("g2.json"), &["charge"])));
    let words: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(words, ["++", "+-", "-+", "--"]);
    for (a, b) in [(0, 3), (1, 2)] {
        let x = column(&h, &rows[a], "n_bar");
        let y = column(&h, &rows[b], "n_bar");
        assert!((x + y).abs() < 1e-12);
    }
}

#[test]
fn verified_charge_agrees_within_band() {
    let fx = Fixtures::new();
    let out = sg_at(
        &fx.path("g1.json"),
        &["charge", "--verify", "--type", "+", "--T", "2000"],
    );
    let (h, rows) = table(&stdout(&out));
    let row = &rows[0];
    let formula = column(&h, row, "n_bar");
    let oracle = column(&h, row, "winding");
    let band = column(&h, row, "winding_band");
    let diff = column(&h, row, "difference");
    assert!((diff - (formula - oracle)).abs() < 1e-12);
    assert!(diff.abs() <= band, "{formula} vs {oracle} ± {band}");
}

#[test]
fn components_of_a_zero_charge_curve() {
    let fx = Fixtures::new();
    let (h, rows) = table(&stdout(&sg_at(&fx.path("m0.json"), &["components"])));
    assert_eq!(h, ["type", "c0", "boundary"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "");
    assert_eq!(rows[0][2], "false");
}

#[test]
fn components_are_admissible_witnesses() {
    let fx = Fixtures::new();
    let curve = fx.path("mixed.json");
    let (_, rows) = table(&stdout(&sg_at(&curve, &["components"])));
    assert_eq!(rows.len(), 2);
    for row in rows {
        let poly = row[1..3].join(",");
        let out = sg_at(&curve, &["validate", "--poly", &poly, "--type", &row[0]]);
        let (_, v) = table(&stdout(&out));
        assert_eq!(v[0][..3], ["true", "false", row[0].as_str()]);
    }
}

#[test]
fn validate_classifies_the_constant_cases() {
    let fx = Fixtures::new();
    let curve = fx.path("g1.json");
    for (c, expect) in [
        ("1", Some("true")),
        ("2", Some("false")),
        ("3", Some("true")),
    ] {
        let (_, rows) = table(&stdout(&sg_at(&curve, &["validate", "--poly", c])));
        assert_eq!(rows[0][0], "true");
        assert_eq!(Some(rows[0][1].as_str()), expect, "P = {c}");
    }
    for c in ["0.5", "4"] {
        assert_eq!(
            sg_at(&curve, &["validate", "--poly", c]).status.code(),
            Some(2),
            "P = {c}"
        );
    }
    assert_eq!(
        sg_at(&curve, &["validate", "--poly", "-2"]).status.code(),
        Some(0)
    );
}

#[test]
fn exit_codes() {
    let fx = Fixtures::new();
    let g1 = fx.path("g1.json");
    assert_eq!(sg(&["charge"]).status.code(), Some(1));
    assert_eq!(sg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        sg_at(&g1, &["charge", "--type", "+-"]).status.code(),
        Some(1)
    );
    assert_eq!(sg_at(&g1, &["charge", "--T", "abc"]).status.code(), Some(1));
    assert_eq!(sg_at(&g1, &["plot", "--svg", "10"]).status.code(), Some(1));
    assert_eq!(
        sg_at(&g1, &["average", "--functional", "nope"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        sg_at(&fx.path("odd.json"), &["validate"]).status.code(),
        Some(2)
    );
    assert_eq!(
        sg_at(&fx.path("bad.json"), &["validate"]).status.code(),
        Some(2)
    );
    assert_eq!(
        sg_at(&fx.path("missing.json"), &["validate"]).status.code(),
        Some(2)
    );
    assert_eq!(
        sg_at(&g1, &["evolve", "--poly", "1,2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        sg_at(&g1, &["evolve", "--poly", "2", "--type", "-"])
            .status
            .code(),
        Some(2)
    );
    let numeric = sg_at(
        &g1,
        &["evolve", "--poly", "2", "--tol", "1e-30", "--length", "1"],
    );
    assert_eq!(numeric.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&numeric.stderr).contains("dynamics::StepFailure"));
    assert_eq!(sg(&["--help"]).status.code(), Some(0));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let fx = Fixtures::new();
    let g2 = fx.path("g2.json");
    for args in [
        &["charge"][..],
        &["components"],
        &[
            "evolve",
            "--poly",
            "1.383737870705,0.2079083109467",
            "--length",
            "2",
            "--samples",
            "20",
        ],
        &["plot", "--poly", "2.3,0.86", "--svg", "120x80"],
    ] {
        let a = sg_at(&g2, args);
        let b = sg_at(&g2, args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn csv_numbers_use_printf_exponent_form() {
    let fx = Fixtures::new();
    let (_, rows) = table(&stdout(&sg_at(
        &fx.path("g1.json"),
        &["charge", "--type", "-"],
    )));
    for cell in &rows[0][1..] {
        let (mantissa, exp) = cell.split_once('e').unwrap();
        assert_eq!(mantissa.trim_start_matches('-').len(), 14, "{cell}");
        assert!(exp.starts_with('+') || exp.starts_with('-'));
        assert!(exp.len() >= 3);
    }
}

#[test]
fn evolve_trajectory_csv() {
    let fx = Fixtures::new();
    let out = sg_at(
        &fx.path("g1.json"),
        &["evolve", "--poly", "2", "--length", "3", "--samples", "30"],
    );
    let (h, rows) = table(&stdout(&out));
    assert_eq!(
        h,
        ["x", "re_lambda1", "im_lambda1", "re_eiu", "im_eiu", "u"]
    );
    assert_eq!(rows.len(), 31);
    let mut last_u: Option<f64> = None;
    for row in &rows {
        let c = column(&h, row, "re_eiu");
        let s = column(&h, row, "im_eiu");
        let u = column(&h, row, "u");
        assert!(((c * c + s * s).sqrt() - 1.0).abs() < 1e-8);
        assert!((u.cos() - c).abs() < 1e-8 && (u.sin() - s).abs() < 1e-8);
        if let Some(prev) = last_u {
            assert!((u - prev).abs() < 1.0, "u must be unwrapped");
        }
        last_u = Some(u);
    }
    let hdr = sg_at(
        &fx.path("g1.json"),
        &["evolve", "--poly", "2", "--dir", "t", "--samples", "2"],
    );
    assert!(stdout(&hdr).starts_with("t,"));
}

#[test]
fn evolve_grid_export() {
    let fx = Fixtures::new();
    let out = sg_at(
        &fx.path("g1.json"),
        &["evolve", "--poly", "2", "--grid", "5x4", "--h", "0.01"],
    );
    let (h, rows) = table(&stdout(&out));
    assert_eq!(h, ["x", "t", "re_eiu", "im_eiu", "u"]);
    assert_eq!(rows.len(), 20);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("residual "));
}

#[test]
fn average_rows_and_component_symmetry() {
    let fx = Fixtures::new();
    let out = sg_at(
        &fx.path("g1.json"),
        &["average", "--functional", "ux", "--T", "100"],
    );
    let (h, rows) = table(&stdout(&out));
    assert_eq!(
        h,
        ["functional", "component", "value", "value_im", "error_band"]
    );
    assert_eq!(rows.len(), 2);
    let plus = column(&h, &rows[0], "value");
    let minus = column(&h, &rows[1], "value");
    assert!((plus + minus).abs() < 1e-6);
    assert!((plus - 2.0 * std::f64::consts::PI * -0.22245286731).abs() < 1e-6);
}

#[test]
fn out_flag_writes_the_file() {
    let fx = Fixtures::new();
    let target = fx.path("charge.csv");
    let o = sg_at(
        &fx.path("g1.json"),
        &["charge", "--out", target.to_str().unwrap()],
    );
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(target)
        .unwrap()
        .starts_with("type,U1"));
}

#[test]
fn thread_cap_from_environment() {
    let fx = Fixtures::new();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_sg"))
            .args(["charge", fx.path("g2.json").to_str().unwrap()])
            .env("SG_THREADS", v)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(one.stdout, run("0").stdout);
    assert!(one.status.success());
    assert_eq!(run("many").status.code(), Some(1));
}

/// Black pixels of the domain rectangles and the pixel hit by the graph in each column.
struct Raster {
    width: usize,
    height: usize,
    black: Vec<bool>,
    graph: Vec<(usize, i64)>,
}

fn rasterize(svg: &str) -> Raster {
    let doc = roxmltree::Document::parse(svg).expect("well-formed XML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(
        root.tag_name().namespace(),
        Some("http://www.w3.org/2000/svg")
    );
    assert_eq!(root.attribute("version"), Some("1.1"));
    let width: usize = root.attribute("width").unwrap().parse().unwrap();
    let height: usize = root.attribute("height").unwrap().parse().unwrap();
    assert_eq!(
        root.attribute("viewBox"),
        Some(format!("0 0 {width} {height}").as_str())
    );

    let mut black = vec![false; width * height];
    let domains = root
        .descendants()
        .find(|n| n.attribute("class") == Some("domain"))
        .expect("domain group");
    assert_eq!(domains.attribute("fill"), Some("black"));
    for r in domains.children().filter(|n| n.has_tag_name("rect")) {
        let num = |a: &str| r.attribute(a).unwrap().parse::<f64>().unwrap();
        let (x, y, w, h) = (num("x"), num("y"), num("width"), num("height"));
        let span = |lo: f64, len: f64, n: usize| {
            (lo.floor().max(0.0) as usize)..((lo + len).ceil().max(0.0) as usize).min(n)
        };
        for px in span(x, w, width) {
            for py in span(y, h, height) {
                let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
                if cx > x && cx < x + w && cy > y && cy < y + h {
                    black[py * width + px] = true;
                }
            }
        }
    }
    let mut graph = Vec::new();
    if let Some(line) = root
        .descendants()
        .find(|n| n.attribute("class") == Some("graph"))
    {
        for pt in line.attribute("points").unwrap().split_whitespace() {
            let (x, y) = pt.split_once(',').unwrap();
            let x: f64 = x.parse().unwrap();
            let y: f64 = y.parse().unwrap();
            graph.push((x.floor() as usize, y.floor() as i64));
        }
    }
    Raster {
        width,
        height,
        black,
        graph,
    }
}

impl Raster {
    fn overlaps(&self) -> usize {
        self.graph
            .iter()
            .filter(|&&(px, py)| {
                py >= 0 && (py as usize) < self.height && self.black[py as usize * self.width + px]
            })
            .count()
    }

    fn black_count(&self) -> usize {
        self.black.iter().filter(|&&b| b).count()
    }
}

#[test]
fn plot_black_never_meets_admissible_graphs() {
    let fx = Fixtures::new();
    let cases: Vec<(&str, String)> = vec![
        ("g1.json", "1".into()),
        ("g1.json", "2".into()),
        ("g1.json", "3".into()),
        ("g1.json", "-2.5".into()),
        ("g2.json", "1.383737870705,0.2079083109467".into()),
        ("g2.json", "2.304355181565,0.863967093338".into()),
        ("g2.json", "-2.282699994596,-0.8628531262447".into()),
        ("m0.json", "0".into()),
    ];
    for (curve, poly) in cases {
        for size in ["800x500", "333x211"] {
            let svg = stdout(&sg_at(
                &fx.path(curve),
                &["plot", "--poly", &poly, "--svg", size],
            ));
            let r = rasterize(&svg);
            assert_eq!(r.graph.len(), r.width);
            assert!(r.black_count() > 0);
            assert_eq!(r.overlaps(), 0, "{curve} P = {poly} at {size}");
        }
    }
}

#[test]
fn plot_detects_inadmissible_graphs() {
    let fx = Fixtures::new();
    for poly in ["0.5", "4"] {
        let svg = stdout(&sg_at(&fx.path("g1.json"), &["plot", "--poly", poly]));
        assert!(rasterize(&svg).overlaps() > 0, "P = {poly}");
    }
}

#[test]
fn plot_without_polynomial() {
    let fx = Fixtures::new();
    let svg = stdout(&sg_at(&fx.path("g2.json"), &["plot", "--svg", "300x200"]));
    let r = rasterize(&svg);
    assert!(r.graph.is_empty());
    assert_eq!((r.width, r.height), (300, 200));
    assert!(r.black_count() > 0);
}
