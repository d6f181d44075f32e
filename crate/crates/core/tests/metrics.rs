mod nmse {
    use dml_core::autodiff::Tape;
    use dml_core::train::*;
    use dml_core::Error;
    use ndarray::Array2;

    #[test]
    fn anchors() {
        let y = [0.1, 0.5, 0.9, 0.3];
        assert_eq!(nmse(&y, &y).unwrap(), 0.0);
        let mean = y.iter().sum::<f64>() / 4.0;
        assert!((nmse(&y, &[mean; 4]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(nmse(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(nrmse(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert!((nmse_with(&[0.0, 2.0], &[0.0, 1.0], NmseMode::MeanSquare).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        assert!(matches!(nmse(&[0.3; 5], &[0.0; 5]), Err(Error::Degenerate(_))));
        assert!(nmse(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn tape_loss_equals_reported_metric() {
        let targets: Vec<Vec<f32>> = vec![vec![0.0, 0.25, 1.0, 0.5], vec![0.9, 0.1, 0.4, 0.2]];
        let preds = [[0.1f64, 0.2, 0.8, 0.55], [0.7, 0.3, 0.35, 0.1]];
        let mut tape = Tape::<f64>::new();
        let p = tape.param(Array2::from_shape_fn((2, 4), |(s, i)| preds[s][i]));
        let refs: Vec<&[f32]> = targets.iter().map(|t| t.as_slice()).collect();
        let loss = nmse_loss(&mut tape, p, &refs, NmseMode::Variance, 0.5).unwrap();
        let expected = 0.5 * (nmse(&targets[0], &preds[0]).unwrap() + nmse(&targets[1], &preds[1]).unwrap());
        assert!((tape.scalar(loss) - expected).abs() < 1e-12);
    }
}
