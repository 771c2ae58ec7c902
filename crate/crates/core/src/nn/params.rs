use crate::tensor::Tensor;

/// Whether a tensor is updated by the optimizer or is running state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    Buffer,
}

/// A collection of named tensors.
///
/// Gradients reuse the implementing type itself: a zeroed clone has exactly
/// the same names and shapes as the parameters, which is how the
/// "gradient shapes mirror parameter shapes" invariant is kept.
pub trait Parameters: Clone {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind));

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut("", &mut |_, t, _| t.fill(0.0));
        z
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t, _| {
            out.push((name.to_string(), t.clone()))
        });
        out
    }

    /// Trainable entries in visiting order, flattened.
    fn flatten_trainable(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |_, t, kind| {
            if kind == ParamKind::Trainable {
                out.extend_from_slice(t.data());
            }
        });
        out
    }

    fn load_trainable(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut("", &mut |_, t, kind| {
            if kind == ParamKind::Trainable {
                let n = t.len();
                t.data_mut().copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        });
        assert_eq!(offset, flat.len(), "flat parameter length");
    }

    fn trainable_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t, kind| {
            if kind == ParamKind::Trainable {
                n += t.len();
            }
        });
        n
    }

    /// Euclidean norm over trainable entries.
    fn global_norm(&self) -> f64 {
        let mut s = 0.0;
        self.visit("", &mut |_, t, kind| {
            if kind == ParamKind::Trainable {
                s += t.sum_sq();
            }
        });
        s.sqrt()
    }

    fn scale_all(&mut self, factor: f64) {
        self.visit_mut("", &mut |_, t, _| t.scale(factor));
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, t, _| ok &= t.all_finite());
        ok
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        for (i, p) in self.iter().enumerate() {
            p.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        for (i, p) in self.iter_mut().enumerate() {
            p.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

impl Parameters for Tensor {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        f(prefix, self, ParamKind::Trainable);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        f(prefix, self, ParamKind::Trainable);
    }
}
