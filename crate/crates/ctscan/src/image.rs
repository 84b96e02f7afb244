/// Square grayscale pixel grid with values in [0, 1], row-major storage.
///
/// Serves both as ground truth (binary phantoms) and as reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(size: usize) -> Self {
        Image {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn from_vec(size: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), size * size, "pixel buffer length mismatch");
        Image { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.size + col] = v;
    }

    /// Number of nonzero pixels.
    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// True when every foreground pixel belongs to one 4-connected component.
    pub fn foreground_connected(&self) -> bool {
        let n = self.size;
        let start = match self.data.iter().position(|&v| v != 0.0) {
            Some(i) => i,
            None => return true,
        };
        let mut seen = vec![false; n * n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0usize;
        while let Some(i) = stack.pop() {
            count += 1;
            let (r, c) = (i / n, i % n);
            let push = |r2: usize, c2: usize, stack: &mut Vec<usize>, seen: &mut Vec<bool>| {
                let j = r2 * n + c2;
                if !seen[j] && self.data[j] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(r - 1, c, &mut stack, &mut seen);
            }
            if r + 1 < n {
                push(r + 1, c, &mut stack, &mut seen);
            }
            if c > 0 {
                push(r, c - 1, &mut stack, &mut seen);
            }
            if c + 1 < n {
                push(r, c + 1, &mut stack, &mut seen);
            }
        }
        count == self.foreground_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connectivity_detects_split_foreground() {
        let mut img = Image::zeros(4);
        img.set(0, 0, 1.0);
        img.set(3, 3, 1.0);
        assert!(!img.foreground_connected());
        img.set(3, 3, 0.0);
        assert!(img.foreground_connected());
    }

    #[test]
    fn empty_image_is_connected() {
        assert!(Image::zeros(8).foreground_connected());
    }
}
