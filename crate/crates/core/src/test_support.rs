//! Hand-built samples for unit tests.

use crate::extraction::{AgentWindow, Dataset, ExtractionStats, Sample, SampleInput, SampleOutput};
use crate::geometry::{ConvexPolygon, Position};
use crate::scalar::Real;
use crate::scene::{AgentRole, DomainInfo, Geometry, ScenarioKind};

pub(crate) fn zone_geometry<T: Real>() -> Geometry<T> {
    Geometry::ConflictZone {
        polygon: ConvexPolygon::rectangle(
            Position::new(T::lit(-2.5), T::lit(-2.5)),
            Position::new(T::lit(2.5), T::lit(2.5)),
        )
        .unwrap(),
        path_half_width: None,
    }
}

/// A valid sample with the given label, gap and domain tag. The target
/// moves straight up the y axis towards the origin.
pub(crate) fn toy_sample<T: Real>(index: usize, accepted: bool, gap: T, domain: &str) -> Sample<T> {
    let l = T::lit;
    let (t_a, t_c) = if accepted { (l(1.0), l(2.0)) } else { (l(2.0), l(1.0)) };
    let mut info = DomainInfo::new();
    info.insert("location".into(), domain.into());
    let output_times = vec![l(0.5), l(1.0), l(1.5), l(2.0)];
    let target_future = output_times
        .iter()
        .map(|&t| Position::new(T::zero(), l(-10.0) + l(5.0) * t))
        .collect();
    Sample {
        input: SampleInput {
            scene_id: format!("toy-{index:05}"),
            scenario_kind: ScenarioKind::Intersection,
            geometry: zone_geometry(),
            domain_info: info,
            t_0: T::zero(),
            t_s: T::zero(),
            input_times: vec![l(-0.5), T::zero()],
            agents: vec![
                AgentWindow {
                    agent_id: "ego".into(),
                    role: AgentRole::Ego,
                    positions: vec![Position::new(l(-25.0), T::zero()), Position::new(l(-20.0), T::zero())],
                },
                AgentWindow {
                    agent_id: "target".into(),
                    role: AgentRole::Target,
                    positions: vec![Position::new(T::zero(), l(-12.5)), Position::new(T::zero(), l(-10.0))],
                },
            ],
            output_times,
            gap_at_t0: gap,
            target_distance: l(7.5),
            safety_margin: gap - l(2.5),
        },
        output: SampleOutput {
            target_future,
            accepted,
            t_a,
            t_c,
            t_crit: l(1.5),
        },
    }
}

pub(crate) fn toy_dataset<T: Real>(spec: &[(bool, f64, &str)]) -> Dataset<T> {
    let samples = spec
        .iter()
        .enumerate()
        .map(|(i, &(a, gap, dom))| toy_sample(i, a, T::lit(gap), dom))
        .collect();
    Dataset::new(samples, "toy".into(), ExtractionStats::default()).unwrap()
}
