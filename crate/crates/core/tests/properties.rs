use proptest::prelude::*;

use mla_core::kernels::{gemm, gemm_pool, trsm_llu};
use mla_core::lu::{lu_blk_ll, lu_unb};
use mla_core::oracle::{gemm_ref, lu_ref, trsm_ref};
use mla_core::{lu_factor, residual_packed, BlockConfig, CacheConfig, Matrix, Policy, Variant, WorkerPool};

fn small_cfg() -> impl Strategy<Value = CacheConfig> {
    (1usize..5, 1usize..40, 1usize..5, prop::sample::select(vec![(8usize, 4usize), (4, 4), (5, 3), (2, 2)]))
        .prop_map(|(mc, kc, nc, (mr, nr))| CacheConfig::new(mc * mr, kc, nc * nr, mr, nr).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gemm_matches_reference(m in 0usize..70, n in 0usize..50, k in 0usize..60,
                              alpha in prop::sample::select(vec![0.0, 1.0, -0.5]),
                              beta in prop::sample::select(vec![1.0, -1.0, 2.0]),
                              cfg in small_cfg(), seed in any::<u64>()) {
        let a = Matrix::random(m, k, seed);
        let b = Matrix::random(k, n, seed ^ 1);
        let c0 = Matrix::random(m, n, seed ^ 2);
        let mut c = c0.clone();
        let mut r = c0.clone();
        gemm(c.as_mut(), a.as_ref(), b.as_ref(), alpha, beta, &cfg).unwrap();
        gemm_ref(r.as_mut(), a.as_ref(), b.as_ref(), alpha, beta).unwrap();
        let tol = 8.0 * (k + 2) as f64 * f64::EPSILON;
        for (x, y) in c.as_slice().iter().zip(r.as_slice()) {
            prop_assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
        let pool = WorkerPool::new(3).unwrap();
        let mut p = c0.clone();
        gemm_pool(&pool, p.as_mut(), a.as_ref(), b.as_ref(), alpha, beta, &cfg).unwrap();
        prop_assert!(p.bitwise_eq(&c));
    }

    #[test]
    fn trsm_matches_reference_bitwise(bs in 1usize..40, n in 0usize..30, seed in any::<u64>()) {
        let l = Matrix::random(bs, bs, seed);
        let b0 = Matrix::random(bs, n, seed ^ 7);
        let mut x = b0.clone();
        let mut r = b0.clone();
        trsm_llu(l.as_ref(), x.as_mut()).unwrap();
        trsm_ref(l.as_ref(), r.as_mut()).unwrap();
        prop_assert!(x.bitwise_eq(&r));
    }

    #[test]
    fn blocked_lu_matches_textbook(n in 1usize..90, extra in 0usize..20, b_i in 1usize..16,
                                   seed in any::<u64>()) {
        let a = Matrix::random(n + extra, n, seed);
        let mut r = a.clone();
        let rr = lu_ref(r.as_mut()).unwrap();
        let mut u = a.clone();
        let ru = lu_unb(u.as_mut()).unwrap();
        prop_assert_eq!(&ru.ipiv, &rr.ipiv);
        let mut l = a.clone();
        let rl = lu_blk_ll(l.as_mut(), b_i, None, &CacheConfig::default()).unwrap();
        prop_assert_eq!(&rl.ipiv, &rr.ipiv);
        prop_assert!(l.bitwise_eq(&u));
        let res = residual_packed(a.as_ref(), u.as_ref(), &ru.ipiv).unwrap();
        prop_assert!(res <= (n + extra) as f64 * 100.0 * f64::EPSILON);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_variant_is_bitwise_identical(n in 1usize..160, b_o in 8usize..64, b_i in 1usize..9,
                                          threads in 2usize..5, seed in any::<u64>()) {
        let block = BlockConfig::new(b_o, b_i).unwrap();
        let pool = WorkerPool::new(threads).unwrap();
        let a = Matrix::random(n, n, seed);
        let mut base = a.clone();
        let rb = lu_unb(base.as_mut()).unwrap();
        for v in Variant::ALL {
            let mut f = a.clone();
            let r = lu_factor(f.as_mut(), &Policy::new(v, block), &pool, None).unwrap();
            prop_assert_eq!(&r.ipiv, &rb.ipiv, "{}", v);
            prop_assert!(f.bitwise_eq(&base), "{}", v);
        }
    }
}
