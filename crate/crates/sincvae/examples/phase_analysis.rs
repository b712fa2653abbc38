//! Tag a recording's seconds with seizure phases and summarize how often
//! a detector fires in each phase across several tracks.

use sincvae::detector::{phase_rates, tag_phases, Horizons, TrackPredictions};
use sincvae::signal::Phase;

fn main() -> sincvae::Result<()> {
    let horizons = Horizons { preictal_s: 30.0, postictal_s: 20.0 };

    // one 300 s track with two seizures
    let intervals = vec![(60.0, 75.0), (180.0, 200.0)];
    let tags = tag_phases(300, &intervals, &horizons)?;
    let count = |p: Phase| tags.iter().filter(|&&t| t == p).count();
    println!(
        "track phases: interictal {}, preictal {}, ictal {}, postictal {} seconds",
        count(Phase::Interictal),
        count(Phase::Preictal),
        count(Phase::Ictal),
        count(Phase::Postictal)
    );
    // the second starting at 155 is both 20 s before seizure 2 and
    // 80 s after seizure 1; early warning wins
    assert_eq!(tags[155], Phase::Preictal);

    // per-phase flag rates across tracks with a deliberately simple
    // "detector": fire during ictal seconds plus a fixed early lead
    let lead = 10usize;
    let mut tracks = Vec::new();
    for (i, intervals) in [vec![(60.0, 75.0), (180.0, 200.0)], vec![(100.0, 130.0)]]
        .into_iter()
        .enumerate()
    {
        let mut flags = vec![false; 300];
        for &(s, e) in &intervals {
            let (s, e) = (s as usize, e as usize);
            for t in s.saturating_sub(lead)..e.min(flags.len()) {
                flags[t] = true;
            }
        }
        tracks.push(TrackPredictions {
            track_id: format!("track{i}"),
            flags,
            intervals,
        });
    }
    let report = phase_rates(&tracks, &horizons)?;
    print!("{}", report.render_text());

    let ictal = report.mean.ictal.expect("both tracks have ictal seconds");
    assert_eq!(ictal, 100.0);
    Ok(())
}
