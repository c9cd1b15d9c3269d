use super::EventRecord;
use crate::error::{Error, Result};
use crate::physics::{Geometry, PropagationMode};

/// Encodes vertical positions as arrival times after a free fall:
/// `t = t_fall + z / v`. Events without a vertical coordinate arrive at
/// `t_fall`. In optical geometries every event is stamped `t = 0` and keeps
/// its coordinates.
pub fn to_arrival_times(events: &mut [EventRecord], geometry: &Geometry) {
    match geometry.mode {
        PropagationMode::TimeOfFlight { fall_time, .. } => {
            for e in events {
                e.t = fall_time + e.z.take().map_or(0.0, |z| z / geometry.speed);
            }
        }
        PropagationMode::Optical { .. } => {
            for e in events {
                e.t = 0.0;
            }
        }
    }
}

/// Converts arrival times back to vertical positions `z = v (t - t_fall)`.
/// The map is affine, so pair separations in `z` are exactly `v` times pair
/// separations in `t`.
pub fn time_of_flight_positions(events: &[EventRecord], geometry: &Geometry) -> Result<Vec<EventRecord>> {
    let PropagationMode::TimeOfFlight { fall_time, .. } = geometry.mode else {
        return Err(Error::Unsupported(
            "arrival times map to positions only in a time-of-flight geometry".into(),
        ));
    };
    Ok(events
        .iter()
        .map(|e| EventRecord {
            z: Some(geometry.speed * (e.t - fall_time)),
            ..*e
        })
        .collect())
}
