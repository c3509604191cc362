/// Holm step-down adjustment, returned in input order.
///
/// Sorted ascending, `adj_(i) = max_{j <= i} (m - j + 1) p_(j)`, clipped at 1.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * p_values[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let adj = holm_adjust(&[0.01, 0.04, 0.03]);
        for (a, e) in adj.iter().zip([0.03, 0.06, 0.06]) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(holm_adjust(&[0.2]), vec![0.2]);
        assert_eq!(holm_adjust(&[1.0, 1.0]), vec![1.0, 1.0]);
        assert!(holm_adjust(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn dominates_input_and_is_monotone(p in prop::collection::vec(0.0f64..=1.0, 1..20)) {
            let adj = holm_adjust(&p);
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
            for (a, q) in adj.iter().zip(&p) {
                prop_assert!(a >= q && *a <= 1.0);
            }
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
        }
    }
}
