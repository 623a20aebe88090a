//! Named tensors packed into one flat parameter vector.

/// Handle to a tensor in a [`Layout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Row-major tensors laid out back to back in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    tensors: Vec<TensorSpec>,
    total: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> TensorId {
        let offset = self.total;
        self.tensors.push(TensorSpec {
            name: name.into(),
            rows,
            cols,
            offset,
        });
        self.total += rows * cols;
        TensorId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: TensorId) -> &TensorSpec {
        &self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn find(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Total number of scalars.
    pub fn size(&self) -> usize {
        self.total
    }

    pub fn slice<'a>(&self, params: &'a [f64], id: TensorId) -> &'a [f64] {
        &params[self.get(id).range()]
    }

    pub fn slice_mut<'a>(&self, params: &'a mut [f64], id: TensorId) -> &'a mut [f64] {
        &mut params[self.get(id).range()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_contiguous() {
        let mut l = Layout::default();
        let a = l.add("a", 2, 3);
        let b = l.add("b", 4, 1);
        assert_eq!(l.get(a).range(), 0..6);
        assert_eq!(l.get(b).range(), 6..10);
        assert_eq!(l.size(), 10);
        assert_eq!(l.find("b").unwrap().rows, 4);
    }
}
