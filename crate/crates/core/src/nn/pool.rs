use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean over all spatial positions: `(N, C, H, W) -> (N, C, 1, 1)`.
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    if h == 0 || w == 0 {
        return Err(Error::EmptySpatial { h, w });
    }
    let hw = h * w;
    let inv = T::of(1.0 / hw as f64);
    let data = input
        .data()
        .chunks(hw)
        .map(|plane| plane.iter().fold(T::zero(), |a, &v| a + v) * inv)
        .collect();
    Tensor::from_vec(&[n, c, 1, 1], data)
}

/// Broadcast `grad_out / (H W)` back over the pooled planes.
pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = match input_shape {
        &[n, c, h, w] => (n, c, h, w),
        other => return Err(Error::shape("global_avg_pool_backward", &[0; 4], other)),
    };
    if grad_out.shape() != [n, c, 1, 1] {
        return Err(Error::shape("global_avg_pool_backward", &[n, c, 1, 1], grad_out.shape()));
    }
    let hw = h * w;
    let inv = T::of(1.0 / hw as f64);
    let mut out = Tensor::zeros(input_shape);
    for (plane, &g) in out.data_mut().chunks_mut(hw).zip(grad_out.data()) {
        let v = g * inv;
        plane.iter_mut().for_each(|p| *p = v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_constant_and_small_plane() {
        let x = Tensor::<f64>::full(&[2, 3, 4, 5], 1.75);
        let z = global_avg_pool(&x).unwrap();
        assert_eq!(z.shape(), &[2, 3, 1, 1]);
        assert!(z.data().iter().all(|&v| v == 1.75));

        let x = Tensor::<f64>::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().data(), &[2.5]);

        let z = global_avg_pool(&Tensor::<f32>::zeros(&[1, 4, 3, 3])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_spatial_extent_is_an_error() {
        let x = Tensor::<f64>::zeros(&[1, 2, 0, 3]);
        assert!(matches!(global_avg_pool(&x), Err(Error::EmptySpatial { .. })));
    }
}
