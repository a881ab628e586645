//! Prints the derived performance figures for the built-in presets.
//!
//! Usage: params_table [preset...]   (defaults to the four full presets)

use pmcw_radcom::scenario::params_report;
use pmcw_radcom::sysparams::{preset, FramePlan, FULL_PRESETS};

fn main() -> pmcw_radcom::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<String> = if args.is_empty() {
        FULL_PRESETS.iter().map(|s| s.to_string()).collect()
    } else {
        args
    };
    let plans: Vec<(String, FramePlan)> = names
        .iter()
        .map(|n| {
            preset(n)
                .map(|p| (n.clone(), p))
                .ok_or_else(|| pmcw_radcom::Error::Config(format!("unknown preset '{n}'")))
        })
        .collect::<pmcw_radcom::Result<_>>()?;
    let (text, csv) = params_report(&plans)?;
    println!("{text}");
    println!("CSV:\n{csv}");
    Ok(())
}
