//! Exploratory numbers behind the acceptance thresholds: the shared volume
//! factor, the f-term circulation factors, and full breakdowns on the
//! presets and their mirrors. Run with --release; prints everything and
//! asserts nothing.

use linkm::curves::{preset, Preset};
use linkm::terms::{assemble_m, f_curve_factor, volume_factor, MContext};
use linkm::Config;

fn main() {
    linkm::init_thread_pool();
    let budget: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(400_000);
    let config = Config { mc_budget: budget, ..Config::default() };

    for p in [Preset::Borromean, Preset::HopfPlusFarCircle, Preset::Chain3, Preset::UnlinkSeparated] {
        let link = preset(p);
        println!("=== {} (budget {budget}) ===", p.name());
        let ctx = MContext::new(&link, &config).unwrap();
        let v = volume_factor(&ctx, budget);
        println!("V = {:.6e} ± {:.2e}", v.value, v.stderr);
        let mut f_sum = 0.0;
        for i in 0..3 {
            let (avg, spread, delta) = f_curve_factor(&ctx, i).unwrap();
            println!(
                "K̄_{} = {:+.6e}   spread {:.2e}   refinement delta {:.2e}",
                i + 1,
                avg,
                spread,
                delta
            );
            f_sum += -2.0 * avg * v.value;
        }
        println!("Σ f_i = {:+.6e}", f_sum);

        let t0 = std::time::Instant::now();
        let no_short = Config { short_circuit: false, ..config.clone() };
        let bd = assemble_m(&link, &no_short).unwrap();
        println!(
            "M (short-circuit off) = {:+.6e} ± {:.2e}   [{} ms]",
            bd.m.value,
            bd.m.stderr,
            t0.elapsed().as_millis()
        );
        println!(
            "  W = {:+.4e} ± {:.1e}   e = {:+.4e}   V = {:+.4e}",
            bd.w.value, bd.w.stderr, bd.e.value, bd.volume_factor.value
        );
        for (k, e) in &bd.b {
            if e.value != 0.0 || e.stderr != 0.0 {
                println!("  b[{k}] = {:+.4e} ± {:.1e}", e.value, e.stderr);
            }
        }
        for (k, e) in &bd.c {
            if e.value != 0.0 || e.stderr != 0.0 {
                println!("  c[{k}] = {:+.4e} ± {:.1e}", e.value, e.stderr);
            }
        }
        for (k, e) in &bd.d {
            if e.value != 0.0 || e.stderr != 0.0 {
                println!("  d[{k}] = {:+.4e} ± {:.1e}", e.value, e.stderr);
            }
        }
        for (i, e) in bd.f.iter().enumerate() {
            if e.value != 0.0 || e.stderr != 0.0 {
                println!("  f[{}] = {:+.4e} ± {:.1e}", i + 1, e.value, e.stderr);
            }
        }

        // mirror comparison
        let mirror = link.mirror_z();
        let bdm = assemble_m(&mirror, &no_short).unwrap();
        println!(
            "M(mirror) = {:+.6e} ± {:.2e}    M + M(mirror) = {:+.3e} (σ: {:.2e})",
            bdm.m.value,
            bdm.m.stderr,
            bd.m.value + bdm.m.value,
            bd.m.stderr.hypot(bdm.m.stderr),
        );
        println!();
    }
}
