//! Noise-penalty metrics of simulated gaits and an impact-sound proxy.

use serde::{Deserialize, Serialize};

use super::{AcousticsError, AudioClip};

/// One control step of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// s
    pub time: f64,
    /// Speeds of the feet that touched down during this step, m/s.
    pub touchdown_speeds: Vec<f64>,
    /// rad/s²
    pub joint_accelerations: [f64; 12],
    /// Base frame, rad/s².
    pub base_angular_acceleration: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyMetrics {
    /// Mean over touchdown events, m/s. `None` when no foot touched down.
    pub contact_velocity: Option<f64>,
    /// Time mean of the 12-joint acceleration norm, rad/s².
    pub joint_acceleration: f64,
    /// Time mean of the roll-pitch angular acceleration norm, rad/s².
    pub base_angular_acceleration: f64,
    /// s
    pub duration: f64,
    pub touchdowns: usize,
}

impl PenaltyMetrics {
    /// Combine metrics of consecutive windows (time- and event-weighted).
    pub fn merge(parts: &[PenaltyMetrics]) -> PenaltyMetrics {
        let duration: f64 = parts.iter().map(|p| p.duration).sum();
        let touchdowns: usize = parts.iter().map(|p| p.touchdowns).sum();
        let contact_velocity = (touchdowns > 0).then(|| {
            parts.iter().filter_map(|p| p.contact_velocity.map(|v| v * p.touchdowns as f64)).sum::<f64>() / touchdowns as f64
        });
        let weighted = |f: fn(&PenaltyMetrics) -> f64| parts.iter().map(|p| f(p) * p.duration).sum::<f64>() / duration;
        PenaltyMetrics {
            contact_velocity,
            joint_acceleration: weighted(|p| p.joint_acceleration),
            base_angular_acceleration: weighted(|p| p.base_angular_acceleration),
            duration,
            touchdowns,
        }
    }

    /// Rows of `metric,value,unit`.
    pub fn to_csv(&self) -> String {
        let cv = self.contact_velocity.map(|v| v.to_string()).unwrap_or_else(|| "absent".into());
        format!(
            "metric,value,unit\ncontact_velocity,{cv},m/s\njoint_acceleration,{},rad/s^2\nbase_angular_acceleration,{},rad/s^2\nduration,{},s\ntouchdowns,{},count\n",
            self.joint_acceleration, self.base_angular_acceleration, self.duration, self.touchdowns
        )
    }
}

/// Averages over the first `duration` seconds of `records` (control period `dt`).
pub fn sim_penalty_metrics(records: &[TrajectoryRecord], dt: f64, duration: f64) -> Result<PenaltyMetrics, AcousticsError> {
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(AcousticsError::InvalidInput("dt and duration must be > 0".into()));
    }
    let n = (duration / dt).round() as usize;
    if records.len() < n || n == 0 {
        return Err(AcousticsError::InsufficientData { needed: n, got: records.len() });
    }
    let window = &records[..n];
    let mut speed_sum = 0.0;
    let mut touchdowns = 0;
    let mut joint = 0.0;
    let mut base = 0.0;
    for r in window {
        speed_sum += r.touchdown_speeds.iter().sum::<f64>();
        touchdowns += r.touchdown_speeds.len();
        joint += r.joint_accelerations.iter().map(|a| a * a).sum::<f64>().sqrt();
        let [x, y, _] = r.base_angular_acceleration;
        base += (x * x + y * y).sqrt();
    }
    Ok(PenaltyMetrics {
        contact_velocity: (touchdowns > 0).then(|| speed_sum / touchdowns as f64),
        joint_acceleration: joint / n as f64,
        base_angular_acceleration: base / n as f64,
        duration: n as f64 * dt,
        touchdowns,
    })
}

/// Impulse train sampled at `rate`: each touchdown adds `0.5 * (total_mass / 4) * v^2`
/// at the sample nearest its time.
pub fn impact_proxy_signal(records: &[TrajectoryRecord], dt: f64, total_mass: f64, rate: f64) -> AudioClip {
    let duration = records.last().map(|r| r.time + dt).unwrap_or(0.0);
    let len = (duration * rate).ceil() as usize;
    let mut samples = vec![0.0; len.max(1)];
    let m_eff = total_mass / 4.0;
    for r in records {
        let i = ((r.time * rate).round() as usize).min(samples.len() - 1);
        for v in &r.touchdown_speeds {
            samples[i] += 0.5 * m_eff * v * v;
        }
    }
    AudioClip { sample_rate: rate, samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(n: usize) -> Vec<TrajectoryRecord> {
        (0..n)
            .map(|k| TrajectoryRecord {
                time: k as f64 * 0.01,
                touchdown_speeds: vec![],
                joint_accelerations: [0.0; 12],
                base_angular_acceleration: [0.0; 3],
            })
            .collect()
    }

    #[test]
    fn standing_has_absent_contact_metric() {
        let m = sim_penalty_metrics(&still(1000), 0.01, 10.0).unwrap();
        assert_eq!(m.contact_velocity, None);
        assert_eq!(m.joint_acceleration, 0.0);
        assert_eq!(m.base_angular_acceleration, 0.0);
    }

    #[test]
    fn constant_joint_acceleration_norm() {
        let mut r = still(1000);
        r.iter_mut().for_each(|x| x.joint_accelerations = [10.0; 12]);
        let m = sim_penalty_metrics(&r, 0.01, 10.0).unwrap();
        assert!((m.joint_acceleration - 34.641).abs() < 1e-3);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(sim_penalty_metrics(&still(999), 0.01, 10.0).is_err());
    }

    #[test]
    fn no_touchdowns_give_silence() {
        let clip = impact_proxy_signal(&still(100), 0.01, 2.2, 48000.0);
        assert!(clip.samples.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn doubling_speed_quadruples_impulse() {
        let mut r = still(100);
        r[10].touchdown_speeds = vec![0.2];
        r[50].touchdown_speeds = vec![0.3, 0.1];
        let a = impact_proxy_signal(&r, 0.01, 2.2, 1000.0);
        r.iter_mut().for_each(|x| x.touchdown_speeds.iter_mut().for_each(|v| *v *= 2.0));
        let b = impact_proxy_signal(&r, 0.01, 2.2, 1000.0);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((4.0 * x - y).abs() < 1e-15);
        }
        assert!((a.samples[100] - 0.5 * 0.55 * 0.04).abs() < 1e-15);
    }
}
