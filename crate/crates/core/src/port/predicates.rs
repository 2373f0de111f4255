//! Pure collision, grounding and channel occupancy predicates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::geometry::{footprints_overlap, polygons_contact, Footprint, Point};
use super::PortGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    ShipShip,
    ShipLand,
}

/// One contact. For ship-ship contacts `a < b`; for ship-land `b` is the
/// land feature name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub time: f64,
    pub kind: ContactKind,
    pub a: String,
    pub b: String,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub time: f64,
    pub ship: String,
    pub point: Point,
    pub depth: f64,
    pub draft: f64,
}

fn centroid(f: &Footprint) -> Point {
    [f.x, f.y]
}

/// All ship-ship and ship-land contacts among `ships` at `time`.
pub fn check_collision(
    time: f64,
    ships: &[(&str, Footprint)],
    geo: &PortGeometry,
) -> Vec<Collision> {
    let mut out = Vec::new();
    for i in 0..ships.len() {
        for j in (i + 1)..ships.len() {
            let (ia, fa) = ships[i];
            let (ib, fb) = ships[j];
            if !footprints_overlap(&fa, &fb) {
                continue;
            }
            let (a, b, pa, pb) = if ia <= ib {
                (ia, ib, fa, fb)
            } else {
                (ib, ia, fb, fa)
            };
            let point = polygons_contact(&pa.polygon(), &pb.polygon()).unwrap_or_else(|| {
                let (ca, cb) = (centroid(&pa), centroid(&pb));
                [0.5 * (ca[0] + cb[0]), 0.5 * (ca[1] + cb[1])]
            });
            out.push(Collision {
                time,
                kind: ContactKind::ShipShip,
                a: a.to_string(),
                b: b.to_string(),
                point,
            });
        }
    }
    for (id, fp) in ships {
        let poly = fp.polygon();
        for land in &geo.land {
            if let Some(point) = polygons_contact(&poly, &land.polygon) {
                out.push(Collision {
                    time,
                    kind: ContactKind::ShipLand,
                    a: id.to_string(),
                    b: land.name.clone(),
                    point,
                });
            }
        }
    }
    out
}

/// Grounding when the draft exceeds the depth under any footprint corner.
/// Corners outside the scenario bounds count as open water.
pub fn check_grounding(
    time: f64,
    id: &str,
    footprint: &Footprint,
    draft: f64,
    geo: &PortGeometry,
) -> Option<Grounding> {
    footprint
        .corners()
        .into_iter()
        .find_map(|c| match geo.depth_at(c) {
            Ok(depth) if draft > depth => Some(Grounding {
                time,
                ship: id.to_string(),
                point: c,
                depth,
                draft,
            }),
            _ => None,
        })
}

/// Ids of ships whose footprint touches the channel polygon.
pub fn channel_occupancy(ships: &[(&str, Footprint)], geo: &PortGeometry) -> BTreeSet<String> {
    ships
        .iter()
        .filter(|(_, fp)| polygons_contact(&fp.polygon(), &geo.channel.polygon).is_some())
        .map(|(id, _)| id.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::port::salerno;

    #[test]
    fn identical_footprints_one_event() {
        let g = salerno();
        let f = Footprint::new(-300.0, 500.0, 0.0, 230.0, 32.2);
        let ev = check_collision(0.0, &[("a", f), ("b", f)], &g);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, ContactKind::ShipShip);
    }

    #[test]
    fn pair_order_symmetric() {
        let g = salerno();
        let f = Footprint::new(-300.0, 500.0, 0.0, 230.0, 32.2);
        let h = Footprint::new(-300.0, 520.0, 0.4, 230.0, 32.2);
        let ab = check_collision(1.0, &[("a", f), ("b", h)], &g);
        let ba = check_collision(1.0, &[("b", h), ("a", f)], &g);
        assert_eq!(ab, ba);
    }

    #[test]
    fn far_apart_no_events() {
        let g = salerno();
        let f = Footprint::new(-300.0, 500.0, 0.0, 230.0, 32.2);
        let h = f.translated(-1000.0, 0.0);
        assert!(check_collision(0.0, &[("a", f), ("b", h)], &g).is_empty());
    }

    #[test]
    fn berthed_ship_grazing_pier_corner() {
        let g = salerno();
        // heading north, bow-starboard corner exactly on the pier corner
        let f = Footprint::new(285.0, -216.0, 0.0, 230.0, 32.0);
        assert_eq!(f.corners()[0], [400.0, -200.0]);
        let ev = check_collision(0.0, &[("a", f)], &g);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].b, "trapezio pier");
    }

    #[test]
    fn grounding_examples() {
        let g = salerno();
        let f = Footprint::new(-300.0, 500.0, 0.3, 230.0, 32.2);
        assert!(check_grounding(0.0, "a", &f, 10.79, &g).is_none());
        assert!(check_grounding(0.0, "a", &f, 5.0, &g).is_none());
        assert!(check_grounding(0.0, "a", &f, 12.5, &g).is_some());
    }

    #[test]
    fn occupancy() {
        let g = salerno();
        let inside = Footprint::new(-1300.0, 500.0, 0.0, 230.0, 32.2);
        let waiting = Footprint::new(-2200.0, 500.0, 0.0, 230.0, 32.2);
        let occ = channel_occupancy(&[("a", inside), ("b", waiting)], &g);
        assert_eq!(occ.into_iter().collect::<Vec<_>>(), vec!["a".to_string()]);
    }
}
