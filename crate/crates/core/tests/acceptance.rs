//! One line per acceptance criterion. Runs without the libtest harness so
//! the lines reach the terminal; a positional argument filters fixtures by
//! name.

use qpmaxwell::verification::acceptance_fixtures;

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut ran = 0;
    let mut passed = 0;
    for (i, f) in acceptance_fixtures().iter().enumerate() {
        if filter.as_deref().is_some_and(|pat| !f.name.contains(pat)) {
            continue;
        }
        let o = f.run();
        println!("criterion {}: {}", i + 1, o.summary_line());
        for c in &o.checks {
            println!(
                "    {} {}: measured {:.10e}, expected {:.10e} [{}]",
                if c.passed() { "ok  " } else { "FAIL" },
                c.label,
                c.measured,
                c.expected,
                c.tolerance
            );
        }
        ran += 1;
        passed += o.passed() as usize;
    }
    println!("acceptance: {passed}/{ran} criteria passed");
    if passed != ran {
        std::process::exit(1);
    }
}
