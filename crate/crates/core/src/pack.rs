//! Floor-ceiling no-rotation (FCNR) strip packing of pyramid levels, with a
//! per-pixel ownership map so a single dense scan can cover every scale.
//!
//! The variant implemented here is fixed and deterministic: rectangles are
//! sorted by non-increasing height; each shelf is filled on its floor left to
//! right; a rectangle that misses every floor is tried on each shelf's
//! ceiling right to left; otherwise a new shelf opens. Shelves are visited
//! first-fit in creation order. No rotation.

use crate::error::{Error, Result};
use crate::plane::ImagePlane;
use crate::pyramid::PyramidLevel;

/// Placement of one pyramid level inside the strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub level: usize,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Placement {
    fn overlaps(&self, other: &Placement) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }

    /// Whether the window at (x, y, w, h) lies wholly inside this placement.
    pub fn contains_window(&self, x: usize, y: usize, w: usize, h: usize) -> bool {
        x >= self.x && y >= self.y && x + w <= self.x + self.w && y + h <= self.y + self.h
    }
}

/// A packed strip: the composed image, the per-level placements and a
/// per-pixel ownership map (level id, or None outside every placement).
#[derive(Debug, Clone)]
pub struct PackedStrip {
    pub strip: ImagePlane,
    pub placements: Vec<Placement>,
    ownership: Vec<i32>,
}

impl PackedStrip {
    pub fn width(&self) -> usize {
        self.strip.width()
    }

    pub fn height(&self) -> usize {
        self.strip.height()
    }

    /// Level id owning the pixel, if any.
    pub fn owner(&self, x: usize, y: usize) -> Option<usize> {
        let v = self.ownership[y * self.strip.width() + x];
        (v >= 0).then_some(v as usize)
    }

    /// The single placement wholly containing the given window, if any.
    pub fn window_owner(&self, x: usize, y: usize, w: usize, h: usize) -> Option<&Placement> {
        let level = self.owner(x, y)?;
        let p = &self.placements[level];
        p.contains_window(x, y, w, h).then_some(p)
    }
}

struct Shelf {
    floor_y: usize,
    height: usize,
    floor_x: usize,
    ceil_x: usize,
    members: Vec<usize>, // indices into placements
}

fn align_up(v: usize, a: usize) -> usize {
    v.div_ceil(a) * a
}

fn align_down(v: usize, a: usize) -> usize {
    v / a * a
}

/// Pack the pyramid levels into a semi-infinite strip of the given width.
///
/// `align` forces placement origins onto multiples of that value (1 for the
/// pure heuristic; the patchwork scanner uses the stage-1 output stride so
/// the response grids of strip and levels coincide).
pub fn pack_fcnr(levels: &[PyramidLevel], strip_width: usize, align: usize) -> Result<PackedStrip> {
    assert!(align >= 1);
    if let Some(widest) = levels.iter().map(|l| l.image.width()).max() {
        if widest > strip_width {
            return Err(Error::Packing(format!(
                "level width {} exceeds strip width {}",
                widest, strip_width
            )));
        }
    }

    // non-increasing height; ties broken by width then level id for determinism
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (&levels[a].image, &levels[b].image);
        lb.height()
            .cmp(&la.height())
            .then(lb.width().cmp(&la.width()))
            .then(a.cmp(&b))
    });

    let mut placements: Vec<Option<Placement>> = vec![None; levels.len()];
    let mut shelves: Vec<Shelf> = Vec::new();
    let mut top = 0usize;

    for &li in &order {
        let (w, h) = (levels[li].image.width(), levels[li].image.height());
        let mut placed = None;

        'shelves: for shelf in shelves.iter_mut() {
            // floor attempt, left to right
            let fx = align_up(shelf.floor_x, align);
            if h <= shelf.height && fx + w <= strip_width {
                let cand = Placement {
                    level: li,
                    x: fx,
                    y: shelf.floor_y,
                    w,
                    h,
                };
                let clear = shelf
                    .members
                    .iter()
                    .all(|&m| !cand.overlaps(placements[m].as_ref().unwrap()));
                if clear {
                    shelf.floor_x = fx + w;
                    shelf.members.push(li);
                    placed = Some(cand);
                    break 'shelves;
                }
            }
            // ceiling attempt, right to left
            if h <= shelf.height && w <= shelf.ceil_x {
                let cx = align_down(shelf.ceil_x - w, align);
                let cy = align_down(shelf.floor_y + shelf.height - h, align);
                if cy >= shelf.floor_y {
                    let cand = Placement {
                        level: li,
                        x: cx,
                        y: cy,
                        w,
                        h,
                    };
                    let clear = shelf
                        .members
                        .iter()
                        .all(|&m| !cand.overlaps(placements[m].as_ref().unwrap()));
                    if clear {
                        shelf.ceil_x = cx;
                        shelf.members.push(li);
                        placed = Some(cand);
                        break 'shelves;
                    }
                }
            }
        }

        let placement = match placed {
            Some(p) => p,
            None => {
                // open a new shelf; its first (tallest remaining) rectangle
                // defines the shelf height
                let floor_y = align_up(top, align);
                let shelf = Shelf {
                    floor_y,
                    height: h,
                    floor_x: w,
                    ceil_x: strip_width,
                    members: vec![li],
                };
                let p = Placement {
                    level: li,
                    x: 0,
                    y: floor_y,
                    w,
                    h,
                };
                top = floor_y + h;
                shelves.push(shelf);
                p
            }
        };
        placements[li] = Some(placement);
    }

    let placements: Vec<Placement> = placements.into_iter().map(|p| p.unwrap()).collect();
    let strip_height = placements
        .iter()
        .map(|p| p.y + p.h)
        .max()
        .unwrap_or(0)
        .max(1);

    let mut strip = ImagePlane::zeros(strip_width.max(1), strip_height);
    let mut ownership = vec![-1i32; strip.width() * strip.height()];
    for p in &placements {
        let src = &levels[p.level].image;
        for y in 0..p.h {
            for x in 0..p.w {
                strip.set(p.x + x, p.y + y, src.get(x, y));
                ownership[(p.y + y) * strip.width() + (p.x + x)] = p.level as i32;
            }
        }
    }

    Ok(PackedStrip {
        strip,
        placements,
        ownership,
    })
}

/// Default strip width: the widest level, aligned up.
pub fn default_strip_width(levels: &[PyramidLevel], align: usize) -> usize {
    align_up(
        levels.iter().map(|l| l.image.width()).max().unwrap_or(1),
        align,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::ImagePlane;

    fn level(index: usize, w: usize, h: usize) -> PyramidLevel {
        let mut img = ImagePlane::zeros(w, h);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((index * 31 + i * 7) % 251) as f32;
        }
        PyramidLevel {
            index,
            scale: 1.0 / (index + 1) as f64,
            image: img,
        }
    }

    #[test]
    fn single_level_at_origin() {
        let levels = vec![level(0, 8, 5)];
        let strip = pack_fcnr(&levels, 10, 1).unwrap();
        assert_eq!(
            strip.placements[0],
            Placement {
                level: 0,
                x: 0,
                y: 0,
                w: 8,
                h: 5
            }
        );
        assert_eq!(strip.height(), 5);
    }

    #[test]
    fn two_fitting_levels_share_shelf() {
        let levels = vec![level(0, 6, 5), level(1, 3, 4)];
        let strip = pack_fcnr(&levels, 10, 1).unwrap();
        assert_eq!(strip.height(), 5);
        assert_eq!(strip.placements[0].y, 0);
        assert!(!strip.placements[0].overlaps(&strip.placements[1]));
    }

    #[test]
    fn too_wide_level_is_an_error() {
        let levels = vec![level(0, 12, 3)];
        assert!(pack_fcnr(&levels, 10, 1).is_err());
    }

    #[test]
    fn ownership_matches_placements() {
        let levels: Vec<_> = (0..5).map(|i| level(i, 9 - i, 8 - i)).collect();
        let strip = pack_fcnr(&levels, 16, 1).unwrap();
        for p in &strip.placements {
            for y in 0..p.h {
                for x in 0..p.w {
                    assert_eq!(strip.owner(p.x + x, p.y + y), Some(p.level));
                    assert_eq!(
                        strip.strip.get(p.x + x, p.y + y),
                        levels[p.level].image.get(x, y)
                    );
                }
            }
        }
        let owned: usize = (0..strip.height())
            .flat_map(|y| (0..strip.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| strip.owner(x, y).is_some())
            .count();
        let total_area: usize = levels.iter().map(|l| l.image.width() * l.image.height()).sum();
        assert_eq!(owned, total_area);
    }

    #[test]
    fn aligned_packing_keeps_origins_on_grid() {
        let levels: Vec<_> = (0..6).map(|i| level(i, 30 - 3 * i, 33 - 4 * i)).collect();
        let strip = pack_fcnr(&levels, 40, 4).unwrap();
        for p in &strip.placements {
            assert_eq!(p.x % 4, 0);
            assert_eq!(p.y % 4, 0);
        }
        for (i, a) in strip.placements.iter().enumerate() {
            for b in &strip.placements[i + 1..] {
                assert!(!a.overlaps(b));
            }
        }
    }
}
