use super::metrics::{MetricsRow, PrequentialMeter};
use super::EvalError;
use crate::instance::Instance;
use crate::learner::Learner;
use crate::Error;
use std::time::Duration;

/// Test-then-train over `stream`: each labeled instance is first predicted
/// and scored, then trained on. A row is emitted every `report_every`
/// scored instances and at the end. Unlabeled instances are only predicted.
pub fn prequential<L, I>(learner: &mut L, stream: I, report_every: u64) -> Result<Vec<MetricsRow>, Error>
where
    L: Learner + ?Sized,
    I: IntoIterator<Item = Instance>,
{
    let mut meter = PrequentialMeter::new(report_every);
    for instance in stream {
        let predicted = learner.predict(&instance);
        let Some(label) = instance.label else { continue };
        if meter.record(predicted == label) {
            meter.push_row(learner.splits(), learner.leaves());
        }
        learner.train(&instance)?;
    }
    meter.finish(learner.splits(), learner.leaves());
    Ok(meter.into_rows())
}

/// Instances per second over the wall time of a run.
pub fn measure_throughput(wall: Duration, instances: u64) -> Result<f64, EvalError> {
    let secs = wall.as_secs_f64();
    if secs > 0.0 {
        Ok(instances as f64 / secs)
    } else {
        Err(EvalError::ZeroDuration)
    }
}

/// `baseline_wall / variant_wall`.
pub fn speedup(baseline_wall: Duration, variant_wall: Duration) -> Result<f64, EvalError> {
    let v = variant_wall.as_secs_f64();
    if v > 0.0 {
        Ok(baseline_wall.as_secs_f64() / v)
    } else {
        Err(EvalError::ZeroDuration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::ClassIdx;

    /// Remembers every call so ordering can be checked.
    #[derive(Default)]
    struct Probe {
        trained: usize,
    }

    impl Learner for Probe {
        fn predict(&self, _: &Instance) -> ClassIdx {
            0
        }
        fn train(&mut self, _: &Instance) -> Result<(), Error> {
            self.trained += 1;
            Ok(())
        }
        fn splits(&self) -> u64 {
            0
        }
        fn leaves(&self) -> u64 {
            1
        }
    }

    struct Recording<'a>(&'a mut Probe, std::cell::RefCell<Vec<(char, usize)>>);

    impl Learner for Recording<'_> {
        fn predict(&self, i: &Instance) -> ClassIdx {
            self.1.borrow_mut().push(('p', i.value(0) as usize));
            self.0.predict(i)
        }
        fn train(&mut self, i: &Instance) -> Result<(), Error> {
            self.1.borrow_mut().push(('t', i.value(0) as usize));
            self.0.train(i)
        }
        fn splits(&self) -> u64 {
            0
        }
        fn leaves(&self) -> u64 {
            1
        }
    }

    fn stream(n: usize) -> Vec<Instance> {
        (0..n).map(|i| Instance::dense(vec![i as f64], Some((i % 2) as u32))).collect()
    }

    #[test]
    fn predicts_before_training_each_instance() {
        let mut probe = Probe::default();
        let mut rec = Recording(&mut probe, Default::default());
        prequential(&mut rec, stream(3), 10).unwrap();
        let calls = rec.1.into_inner();
        assert_eq!(calls, vec![('p', 0), ('t', 0), ('p', 1), ('t', 1), ('p', 2), ('t', 2)]);
        assert_eq!(probe.trained, 3);
    }

    #[test]
    fn constant_learner_on_balanced_stream_is_at_chance() {
        let mut probe = Probe::default();
        let rows = prequential(&mut probe, stream(1000), 100).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows.last().unwrap().accuracy_cum, 50.0);
        assert_eq!(probe.trained, 1000);
    }

    #[test]
    fn report_interval_equal_to_length_gives_one_row() {
        let rows = prequential(&mut Probe::default(), stream(250), 250).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].instances, 250);
    }

    #[test]
    fn throughput_arithmetic() {
        assert_eq!(measure_throughput(Duration::from_secs(2), 1000).unwrap(), 500.0);
        assert!(measure_throughput(Duration::ZERO, 1).is_err());
        assert_eq!(speedup(Duration::from_secs(8), Duration::from_secs(2)).unwrap(), 4.0);
    }
}
