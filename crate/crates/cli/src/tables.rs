//! Named benchmark tables.

use branchpde::problem::{example_sech, example_tan2, example_tan_sum};
use branchpde::{estimate_value, ProblemSpec, Result};

use crate::report::{Report, Row};

pub const TABLE_NAMES: [&str; 7] = [
    "example1",
    "example1r",
    "example09",
    "example2",
    "example2_1",
    "example2D",
    "example4D",
];

pub struct TableDef {
    pub name: &'static str,
    pub title: &'static str,
    pub n: u64,
    /// `(r, x)` per row.
    pub rows: Vec<(f64, Vec<f64>)>,
    pub vary_r: bool,
    pub notes: Vec<String>,
    build: fn(f64) -> Result<ProblemSpec>,
}

fn tan_sum_2(r: f64) -> Result<ProblemSpec> {
    example_tan_sum(2, r)
}

fn tan_sum_4(r: f64) -> Result<ProblemSpec> {
    example_tan_sum(4, r)
}

pub fn table(name: &str) -> Option<TableDef> {
    let def = |name, title, n, rows: Vec<(f64, Vec<f64>)>, build| TableDef {
        name,
        title,
        n,
        rows,
        vary_r: false,
        notes: Vec::new(),
        build,
    };
    let t = match name {
        "example1" => def(
            "example1",
            "u'' - u + u^3 = 0 on (-0.3, 0.3), u = sqrt(2)/cosh(x)",
            1_000_000,
            vec![(0.3, vec![0.0]), (0.3, vec![-0.2])],
            example_sech as fn(f64) -> Result<ProblemSpec>,
        ),
        "example1r" => TableDef {
            vary_r: true,
            ..def(
                "example1r",
                "u'' - u + u^3 = 0 on (-r, r) at x = 0, u = sqrt(2)/cosh(x)",
                1_000_000,
                vec![(0.4, vec![0.0]), (0.5, vec![0.0])],
                example_sech,
            )
        },
        "example09" => TableDef {
            notes: vec!["Note: at r = 0.9 the estimator is a valid representation of a different solution \
                         of the same boundary value problem; relative errors are against sqrt(2)/cosh(x)."
                .into()],
            ..def(
                "example09",
                "u'' - u + u^3 = 0 on (-0.9, 0.9), boundary data sqrt(2)/cosh(x)",
                1_000_000,
                vec![(0.9, vec![0.0]), (0.9, vec![-0.2])],
                example_sech,
            )
        },
        "example2" => def(
            "example2",
            "u''/2 + 1/2 - u - 3u^2/2 = 0 on (-0.14, 0.14), u = 1 + 2 tan^2(x)",
            1_000_000,
            vec![(0.14, vec![0.0]), (0.14, vec![-0.1])],
            example_tan2,
        ),
        "example2_1" => def(
            "example2_1",
            "u''/2 + 1/2 - u - 3u^2/2 = 0 on (-0.3, 0.3), u = 1 + 2 tan^2(x)",
            1_000_000,
            vec![(0.3, vec![0.0]), (0.3, vec![-0.1])],
            example_tan2,
        ),
        "example2D" => def(
            "example2D",
            "Laplacian u = 4(u^3 + u) on (-0.48, 0.48)^2, u = tan(x1 + x2)",
            500_000,
            [[0.0, 0.0], [0.1, 0.0], [0.2, 0.1], [0.2, 0.2]].iter().map(|x| (0.48, x.to_vec())).collect(),
            tan_sum_2,
        ),
        "example4D" => def(
            "example4D",
            "Laplacian u = 8(u^3 + u) on (-0.24, 0.24)^4, u = tan(x1 + ... + x4)",
            500_000,
            [[0.0, 0.0, 0.0, 0.0], [0.1, 0.0, 0.0, 0.0], [0.1, 0.1, 0.0, 0.0], [0.1, 0.1, 0.1, 0.0]]
                .iter()
                .map(|x| (0.24, x.to_vec()))
                .collect(),
            tan_sum_4,
        ),
        _ => return None,
    };
    Some(t)
}

impl TableDef {
    /// Runs every row with `n` samples (the table's own size when `None`).
    pub fn run(&self, n: Option<u64>, seed: u64) -> Result<Report> {
        let n = n.unwrap_or(self.n);
        let mut rows = Vec::with_capacity(self.rows.len());
        for (r, x) in &self.rows {
            let spec = (self.build)(*r)?;
            let res = estimate_value(&spec, x, n, seed)?;
            let exact = spec.exact.as_ref().map(|f| f.eval(x));
            let row = Row::new(x, &res, exact, seed);
            rows.push(if self.vary_r { row.with_r(*r) } else { row });
        }
        Ok(Report {
            title: format!("{}: {}", self.name, self.title),
            rows,
            seed,
            notes: self.notes.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in TABLE_NAMES {
            let t = table(name).unwrap();
            assert_eq!(t.name, name);
            assert!(!t.rows.is_empty());
            for (r, x) in &t.rows {
                let spec = (t.build)(*r).unwrap();
                assert!(spec.rect.contains(x));
                assert!(spec.exact.is_some());
            }
        }
        assert!(table("example3").is_none());
    }

    #[test]
    fn small_run_has_expected_shape() {
        let t = table("example1r").unwrap();
        let rep = t.run(Some(2000), 5).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[1].r, Some(0.5));
        assert!(rep
            .rows
            .iter()
            .all(|r| r.n == 2000 && r.rel_error.is_some()));
    }
}
