use std::fmt::Write as _;

/// Outcome of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Per-robot arrival time, or the time limit for robots that never
    /// arrived.
    pub travel_times: Vec<f64>,
    pub avg_travel: f64,
    pub max_travel: f64,
    /// Per-robot time spent with repulsion or cancellation active.
    pub avoidance_times: Vec<f64>,
    pub avg_avoidance: f64,
    /// Smallest center distance between a robot and any other active agent.
    pub min_distance: f64,
    /// Robots that did not arrive before the time limit.
    pub timed_out: usize,
    /// Class index each robot committed to.
    pub classes: Vec<usize>,
    pub replans: usize,
    pub replan_failures: usize,
    /// Steps where a wall blocked an integration step.
    pub wall_stops: usize,
    pub steps: usize,
}

impl RunMetrics {
    pub fn timed_out_flag(&self) -> bool {
        self.timed_out > 0
    }

    pub const CSV_HEADER: &'static str =
        "robots,pedestrians,policy,seed,avg_travel,max_travel,avg_avoidance,min_distance,timed_out,replans,replan_failures,wall_stops,steps";

    /// One CSV row matching [`Self::CSV_HEADER`]. Floats use the shortest
    /// round-trip representation, so equal metrics give equal bytes.
    pub fn csv_row(&self, pedestrians: usize, policy: &str, seed: u64) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{:?},{:?},{:?},{:?},{},{},{},{},{}",
            self.travel_times.len(),
            pedestrians,
            policy,
            seed,
            self.avg_travel,
            self.max_travel,
            self.avg_avoidance,
            self.min_distance,
            self.timed_out,
            self.replans,
            self.replan_failures,
            self.wall_stops,
            self.steps
        )
        .unwrap();
        s
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
