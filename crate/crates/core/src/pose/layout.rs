//! Skeleton layouts and their left/right mirror declarations.

use super::{ComponentSpec, PoseError, PoseHeader, FACE};

/// Text of the shipped 75-point body + hands layout.
pub const DEFAULT_LAYOUT_TEXT: &str = include_str!("../../layouts/holistic75.layout");

/// Face mesh size of the 543-point Holistic layout.
const FACE_POINTS: u16 = 468;

/// How a horizontal flip relabels keypoints.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MirrorTable {
    /// Components whose blocks trade places (e.g. the two hands).
    pub component_swaps: Vec<(String, String)>,
    /// Point pairs swapped inside a single component.
    pub point_pairs: Vec<(String, Vec<(u16, u16)>)>,
}

impl MirrorTable {
    fn swap_partner(&self, name: &str) -> Option<&str> {
        self.component_swaps.iter().find_map(|(a, b)| {
            if a == name {
                Some(b.as_str())
            } else if b == name {
                Some(a.as_str())
            } else {
                None
            }
        })
    }

    fn pairs_for(&self, name: &str) -> Option<&[(u16, u16)]> {
        self.point_pairs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
    }

    /// Source index for every output point after a flip.
    ///
    /// Components not mentioned by the table keep their point order (only
    /// their x coordinates are negated). A header that the table does not
    /// touch at all, or one holding only half of a swap pair, is rejected.
    pub fn permutation(&self, header: &PoseHeader) -> Result<Vec<usize>, PoseError> {
        let k = header.total_points();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut covered = false;
        let mut missing = Vec::new();
        for c in header.components() {
            let (start, count) = header.component_slice(&c.name)?;
            if let Some(partner) = self.swap_partner(&c.name) {
                match header.component_slice(partner) {
                    Ok((pstart, pcount)) if pcount == count => {
                        for i in 0..count {
                            perm[start + i] = pstart + i;
                        }
                        covered = true;
                    }
                    _ => missing.push(c.name.clone()),
                }
            } else if let Some(pairs) = self.pairs_for(&c.name) {
                for &(a, b) in pairs {
                    let (a, b) = (a as usize, b as usize);
                    if a >= count || b >= count {
                        missing.push(c.name.clone());
                        break;
                    }
                    perm[start + a] = start + b;
                    perm[start + b] = start + a;
                }
                covered = true;
            }
        }
        if !missing.is_empty() {
            return Err(PoseError::MissingMirrorTable(missing));
        }
        if !covered {
            return Err(PoseError::MissingMirrorTable(
                header.components().iter().map(|c| c.name.clone()).collect(),
            ));
        }
        Ok(perm)
    }
}

/// A parsed layout file: components with limbs plus the mirror table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonLayout {
    pub components: Vec<ComponentSpec>,
    pub mirror: MirrorTable,
}

fn parse_pair(tok: &str) -> Option<(u16, u16)> {
    let (a, b) = tok.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

impl SkeletonLayout {
    pub fn parse(text: &str) -> Result<Self, PoseError> {
        let mut components: Vec<ComponentSpec> = Vec::new();
        let mut mirror = MirrorTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| PoseError::Layout {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let directive = toks.next().unwrap_or_default();
            let rest: Vec<&str> = toks.collect();
            let pairs = |toks: &[&str]| -> Result<Vec<(u16, u16)>, PoseError> {
                toks.iter()
                    .map(|t| parse_pair(t).ok_or_else(|| err(format!("bad pair {t:?}"))))
                    .collect()
            };
            match directive {
                "component" => {
                    let [name, count] = rest[..] else {
                        return Err(err("expected: component <NAME> <count>".into()));
                    };
                    let count: u16 = count
                        .parse()
                        .map_err(|_| err(format!("bad point count {count:?}")))?;
                    if components.iter().any(|c| c.name == name) {
                        return Err(err(format!("duplicate component {name}")));
                    }
                    components.push(
                        ComponentSpec::new(name, count, vec![])
                            .map_err(|e| err(e.to_string()))?,
                    );
                }
                "limbs" => {
                    let Some((name, edges)) = rest.split_first() else {
                        return Err(err("expected: limbs <NAME> <a>-<b> ...".into()));
                    };
                    let edges = pairs(edges)?;
                    let comp = components
                        .iter_mut()
                        .find(|c| c.name == *name)
                        .ok_or_else(|| err(format!("limbs for undeclared component {name}")))?;
                    comp.limbs.extend(edges);
                    comp.validate().map_err(|e| err(e.to_string()))?;
                }
                "mirror_components" => {
                    let [a, b] = rest[..] else {
                        return Err(err("expected: mirror_components <A> <B>".into()));
                    };
                    let ca = components.iter().find(|c| c.name == a);
                    let cb = components.iter().find(|c| c.name == b);
                    match (ca, cb) {
                        (Some(ca), Some(cb)) if a != b && ca.point_count == cb.point_count => {}
                        _ => return Err(err(format!("cannot swap {a} and {b}"))),
                    }
                    mirror.component_swaps.push((a.to_string(), b.to_string()));
                }
                "mirror_points" => {
                    let Some((name, toks)) = rest.split_first() else {
                        return Err(err("expected: mirror_points <NAME> <a>-<b> ...".into()));
                    };
                    let comp = components
                        .iter()
                        .find(|c| c.name == *name)
                        .ok_or_else(|| err(format!("mirror for undeclared component {name}")))?;
                    let ps = pairs(toks)?;
                    let mut seen = vec![false; comp.point_count as usize];
                    for &(a, b) in &ps {
                        if a == b || a >= comp.point_count || b >= comp.point_count {
                            return Err(err(format!("invalid mirror pair {a}-{b}")));
                        }
                        for idx in [a, b] {
                            if std::mem::replace(&mut seen[idx as usize], true) {
                                return Err(err(format!("point {idx} mirrored twice")));
                            }
                        }
                    }
                    mirror.point_pairs.push((name.to_string(), ps));
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        if components.is_empty() {
            return Err(PoseError::Layout {
                line: 0,
                message: "layout declares no components".into(),
            });
        }
        Ok(SkeletonLayout { components, mirror })
    }

    /// The shipped 75-point layout (BODY 33, LEFT_HAND 21, RIGHT_HAND 21).
    pub fn holistic75() -> Self {
        Self::parse(DEFAULT_LAYOUT_TEXT).expect("shipped layout parses")
    }

    /// The full 543-point layout: a 468-point FACE mesh ahead of the 75-point layout.
    pub fn holistic543() -> Self {
        let mut layout = Self::holistic75();
        layout.components.insert(
            0,
            ComponentSpec {
                name: FACE.to_string(),
                point_count: FACE_POINTS,
                limbs: vec![],
            },
        );
        layout
    }

    pub fn header(&self, fps: f32, dims: u8) -> Result<PoseHeader, PoseError> {
        PoseHeader::new(fps, dims, self.components.clone())
    }

    pub fn total_points(&self) -> usize {
        self.components.iter().map(|c| c.point_count as usize).sum()
    }

    pub fn total_limbs(&self) -> usize {
        self.components.iter().map(|c| c.limbs.len()).sum()
    }
}
