//! Nested ANOVA of cascade duration and reach over a reduced scenario grid,
//! with residual diagnostics.

use influnet::analysis::{nested_anova, Response};
use influnet::scenarios::{run_experiment_grid, GridConfig};

fn main() -> influnet::Result<()> {
    let config = GridConfig {
        n: 120,
        seed: 4,
        ..GridConfig::default()
    };
    let records = run_experiment_grid(&config)?;
    for response in [Response::LogTotalTime, Response::LogReach] {
        let report = nested_anova(&records, response)?;
        println!(
            "{response:?} ({} rows used, {} excluded)",
            report.n_used, report.n_excluded
        );
        println!(
            "  {:<28} {:>3} {:>10} {:>9} {:>9}",
            "term", "df", "sum sq", "F", "p"
        );
        for row in &report.factors {
            let f = row.f.map_or("-".into(), |v| format!("{v:.3}"));
            let p = row.p.map_or("-".into(), |v| format!("{v:.4}"));
            println!(
                "  {:<28} {:>3} {:>10.4} {f:>9} {p:>9}",
                row.factor, row.df, row.sum_sq
            );
        }
        println!(
            "  residual df {}, SS {:.4}",
            report.residual_df, report.residual_ss
        );
        let d = report.diagnostics;
        println!(
            "  Jarque-Bera p {}, Levene p {}\n",
            d.jarque_bera_p.map_or("-".into(), |p| format!("{p:.4}")),
            d.levene_p.map_or("-".into(), |p| format!("{p:.4}")),
        );
    }
    Ok(())
}
