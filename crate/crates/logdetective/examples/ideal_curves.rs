//! Emits the idealized strategy-comparison curves as CSV: for each total
//! matvec budget, the square-rooted idealized one-sample variance, the
//! idealized low-rank error, and the square-rooted idealized alpha-rank
//! variances for alpha in {0, 0.1, ..., 0.9}, all normalized by the exact
//! trace-log. These are the closed-form curves behind the budget-allocation
//! comparison plots; pipe the output into any plotting tool.
//!
//! Usage: cargo run --release --example ideal_curves [n] [m] > curves.csv

use logdetective::bounds::{
    ideal_alpha_rank_var, ideal_lowrank_err, ideal_one_sample_var, TailSpectrum,
};
use logdetective::operator::trace_log_exact;
use logdetective::testmat::{gaps_reference_spectrum, MatrixSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4000);
    let m: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);

    let families: Vec<(&str, logdetective::Spectrum)> = vec![
        (
            "alg",
            MatrixSpec::Alg { n, mu: 1e-2 }
                .build()
                .unwrap()
                .known_spectrum()
                .unwrap()
                .clone(),
        ),
        (
            "geom",
            MatrixSpec::Geom { n, mu: 1e-4 }
                .build()
                .unwrap()
                .known_spectrum()
                .unwrap()
                .clone(),
        ),
        ("gaps_diag", gaps_reference_spectrum(n, n, 1e-6).unwrap()),
    ];

    println!("family,n,m,total,ell,curve,alpha,value");
    for (name, spectrum) in &families {
        let exact = trace_log_exact(spectrum);
        let ts = TailSpectrum::new(spectrum);
        let mut total = 100 + m;
        while total <= 1000 + m {
            let ell = total - m;
            let one = ideal_one_sample_var(&ts, ell.min(n)).unwrap().sqrt() / exact;
            println!("{name},{n},{m},{total},{ell},one_sample,,{one:e}");
            let low = ideal_lowrank_err(&ts, total.min(n)).unwrap() / exact;
            println!("{name},{n},{m},{total},{ell},lowrank,,{low:e}");
            for tenths in 0..=9usize {
                let alpha = tenths as f64 / 10.0;
                let v = ideal_alpha_rank_var(&ts, ell.min(n), m, alpha)
                    .unwrap()
                    .sqrt()
                    / exact;
                println!("{name},{n},{m},{total},{ell},alpha_rank,{alpha},{v:e}");
            }
            total += 100;
        }
    }
}
