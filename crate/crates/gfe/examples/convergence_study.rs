//! Programmatic refinement studies: interpolation-only rates and full
//! solve rates for the sphere problem, printed as a small table.

use gfe::bench::{interpolation_study, run, RunConfig};

fn main() {
    let mut config = RunConfig::new("p2");
    config.order = Some(1);
    config.levels = Some(3);

    println!("interpolation-only errors of the closed-form solution:");
    let study = interpolation_study(&config).unwrap();
    println!("  level        h        d_L2      eoc      D_12      eoc");
    for (i, row) in study.rows.iter().enumerate() {
        let (e2, e12) = if i == 0 {
            ("    -".to_string(), "    -".to_string())
        } else {
            (
                format!("{}", study.report.eoc_l2[i - 1]),
                format!("{}", study.report.eoc_d12[i - 1]),
            )
        };
        println!(
            "  {:>5} {:>9.5} {:>10.3e} {:>8} {:>9.3e} {:>8}",
            row.level, row.h, row.d_l2, e2, row.d_12, e12
        );
    }

    println!("\nfull solves (errors against the closed form):");
    let outcome = run(&config).unwrap();
    println!("  level        h        d_L2      eoc      D_12      eoc   iters");
    for (i, row) in outcome.rows.iter().enumerate() {
        let (e2, e12) = if i == 0 {
            ("    -".to_string(), "    -".to_string())
        } else {
            (
                format!("{}", outcome.report.eoc_l2[i - 1]),
                format!("{}", outcome.report.eoc_d12[i - 1]),
            )
        };
        println!(
            "  {:>5} {:>9.5} {:>10.3e} {:>8} {:>9.3e} {:>8} {:>6}",
            row.level, row.h, row.d_l2, e2, row.d_12, e12, row.iters
        );
    }
}
