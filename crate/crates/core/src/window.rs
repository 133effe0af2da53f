use crate::error::{dim, invalid, Result};
use crate::scalar::Real;

/// Block of uniformly sampled, named, equal-length channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataWindow<T> {
    sample_time: T,
    start_time: T,
    names: Vec<String>,
    channels: Vec<Vec<T>>,
}

impl<T: Real> DataWindow<T> {
    pub fn new(
        sample_time: T,
        start_time: T,
        names: Vec<String>,
        channels: Vec<Vec<T>>,
    ) -> Result<Self> {
        if !(sample_time > T::zero()) || !sample_time.is_finite() {
            return Err(invalid(format!(
                "sample time must be positive, got {sample_time}"
            )));
        }
        if names.len() != channels.len() {
            return Err(dim(format!(
                "{} channel names for {} channels",
                names.len(),
                channels.len()
            )));
        }
        if let Some(first) = channels.first() {
            if first.is_empty() {
                return Err(invalid("channels must hold at least one sample"));
            }
            if let Some((i, c)) = channels
                .iter()
                .enumerate()
                .find(|(_, c)| c.len() != first.len())
            {
                return Err(dim(format!(
                    "channel '{}' has {} samples, expected {}",
                    names[i],
                    c.len(),
                    first.len()
                )));
            }
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(invalid(format!("duplicate channel name '{n}'")));
            }
        }
        Ok(Self {
            sample_time,
            start_time,
            names,
            channels,
        })
    }

    pub fn sample_time(&self) -> T {
        self.sample_time
    }

    pub fn start_time(&self) -> T {
        self.start_time
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel (0 for a window without channels).
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> T {
        self.sample_time * T::lit(self.len() as f64)
    }

    pub fn time(&self, k: usize) -> T {
        self.start_time + self.sample_time * T::lit(k as f64)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn channel(&self, name: &str) -> Result<&[T]> {
        self.index_of(name)
            .map(|i| self.channels[i].as_slice())
            .ok_or_else(|| invalid(format!("unknown channel '{name}'")))
    }

    /// Sub-window holding only the named channels, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut out_names = Vec::with_capacity(names.len());
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            out.push(self.channel(n)?.to_vec());
            out_names.push((*n).to_string());
        }
        Self::new(self.sample_time, self.start_time, out_names, out)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels.len() {
            return Err(dim("rename needs one name per channel"));
        }
        self.names = names;
        Self::new(self.sample_time, self.start_time, self.names, self.channels)
    }

    /// Appends the channels of `other` (same length and sample time).
    pub fn merge(mut self, other: Self) -> Result<Self> {
        if (other.sample_time - self.sample_time).abs() > self.sample_time * T::lit(1e-9) {
            return Err(invalid("cannot merge windows with different sample times"));
        }
        if !self.channels.is_empty() && other.len() != self.len() {
            return Err(dim("cannot merge windows of different lengths"));
        }
        self.names.extend(other.names);
        self.channels.extend(other.channels);
        Self::new(self.sample_time, self.start_time, self.names, self.channels)
    }

    pub fn energy(&self, name: &str) -> Result<T> {
        Ok(self
            .channel(name)?
            .iter()
            .fold(T::zero(), |a, v| a + *v * *v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_duplicate() {
        let r = DataWindow::new(
            0.1,
            0.0,
            vec!["a".into(), "b".into()],
            vec![vec![1.0], vec![1.0, 2.0]],
        );
        assert!(r.is_err());
        let r = DataWindow::new(
            0.1,
            0.0,
            vec!["a".into(), "a".into()],
            vec![vec![1.0], vec![1.0]],
        );
        assert!(r.is_err());
        let r = DataWindow::<f64>::new(0.0, 0.0, vec![], vec![]);
        assert!(r.is_err());
    }

    #[test]
    fn select_and_time() {
        let w = DataWindow::new(
            0.5,
            1.0,
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        let s = w.select(&["b"]).unwrap();
        assert_eq!(s.channels()[0], vec![3.0, 4.0]);
        assert_eq!(w.time(1), 1.5);
        assert!(w.select(&["zz"]).is_err());
    }
}
