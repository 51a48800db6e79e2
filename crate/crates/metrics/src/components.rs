use lgir_core::TargetMask;

/// One 8-connected region of foreground pixels, in (row, col) coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Mean (row, col) of the member pixels.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sr, sc) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(ar, ac), &(r, c)| (ar + r as f64, ac + c as f64));
        (sr / n, sc / n)
    }
}

/// Extracts 8-connected components by breadth-first flood fill, in scan
/// order, so the result is deterministic: components are ordered by their
/// first (topmost-leftmost) pixel and pixels within a component by visit
/// order.
pub fn connected_components(mask: &TargetMask) -> Vec<Component> {
    let (h, w) = (mask.height(), mask.width());
    let mut visited = vec![false; h * w];
    let mut out = Vec::new();

    for start_r in 0..h {
        for start_c in 0..w {
            if !mask.pixels[[start_r, start_c]] || visited[start_r * w + start_c] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut queue = std::collections::VecDeque::new();
            visited[start_r * w + start_c] = true;
            queue.push_back((start_r, start_c));
            while let Some((r, c)) = queue.pop_front() {
                pixels.push((r, c));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if mask.pixels[[nr, nc]] && !visited[nr * w + nc] {
                            visited[nr * w + nc] = true;
                            queue.push_back((nr, nc));
                        }
                    }
                }
            }
            out.push(Component { pixels });
        }
    }
    out
}
