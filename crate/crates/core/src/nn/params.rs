//! Uniform traversal over every trainable tensor of a model.
//!
//! Gradients are stored in a value of the same type as the parameters, so the
//! optimizer and the checkpoint code walk both with the same visitor order.

/// A collection of named, flat `f64` tensors visited in a fixed order.
pub trait Parameters {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64]));
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub fn tensors<P: Parameters + ?Sized>(p: &P) -> Vec<(String, &[f64])> {
    let mut out = Vec::new();
    p.visit("", &mut |name, t| out.push((name, t)));
    out
}

pub fn num_params<P: Parameters + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, t| n += t.len());
    n
}

pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::new();
    p.visit("", &mut |_, t| out.extend_from_slice(t));
    out
}

/// Overwrite parameters from a flat vector produced by [`flatten`].
pub fn assign_flat<P: Parameters + ?Sized>(p: &mut P, flat: &[f64]) {
    let mut offset = 0;
    p.visit_mut("", &mut |_, t| {
        t.copy_from_slice(&flat[offset..offset + t.len()]);
        offset += t.len();
    });
    assert_eq!(offset, flat.len(), "flat vector length does not match parameters");
}

pub fn fill<P: Parameters + ?Sized>(p: &mut P, value: f64) {
    p.visit_mut("", &mut |_, t| t.fill(value));
}

/// `dst += scale * src`, tensor by tensor. Both must share structure.
pub fn add_scaled<P: Parameters>(dst: &mut P, src: &P, scale: f64) {
    let src = tensors(src);
    let mut i = 0;
    dst.visit_mut("", &mut |name, t| {
        let (sname, s) = &src[i];
        assert_eq!(&name, sname, "parameter structure mismatch");
        for (d, v) in t.iter_mut().zip(s.iter()) {
            *d += scale * v;
        }
        i += 1;
    });
}

pub fn scale<P: Parameters + ?Sized>(p: &mut P, s: f64) {
    p.visit_mut("", &mut |_, t| t.iter_mut().for_each(|v| *v *= s));
}

impl Parameters for Vec<f64> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        f(prefix.to_string(), self)
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        f(prefix.to_string(), self)
    }
}

impl Parameters for super::Matrix {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        f(prefix.to_string(), self.data())
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        f(prefix.to_string(), self.data_mut())
    }
}
