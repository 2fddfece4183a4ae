/// Which two-tier learning rate applies to a parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Backbone,
    Head,
}

/// Mutable view over one parameter tensor and its accumulated gradient.
pub struct ParamSlot<'a> {
    pub group: ParamGroup,
    pub value: &'a mut Vec<f64>,
    pub grad: &'a mut Vec<f64>,
}

/// Adam with bias correction; the learning rate is resolved per parameter
/// group on every step so the backbone and head can move at different rates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    moment1: Vec<Vec<f64>>,
    moment2: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moment1: Vec::new(),
            moment2: Vec::new(),
        }
    }

    /// One update over all slots. Slot order must be stable across calls.
    pub fn step(&mut self, slots: &mut [ParamSlot<'_>], lr_for: impl Fn(ParamGroup) -> f64) {
        if self.moment1.is_empty() {
            self.moment1 = slots.iter().map(|s| vec![0.0; s.value.len()]).collect();
            self.moment2 = slots.iter().map(|s| vec![0.0; s.value.len()]).collect();
        }
        assert_eq!(self.moment1.len(), slots.len(), "optimizer bound to a different model");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (slot, (m1, m2)) in slots.iter_mut().zip(self.moment1.iter_mut().zip(&mut self.moment2)) {
            let lr = lr_for(slot.group);
            for i in 0..slot.value.len() {
                let g = slot.grad[i];
                m1[i] = self.beta1 * m1[i] + (1.0 - self.beta1) * g;
                m2[i] = self.beta2 * m2[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m1[i] / c1;
                let v_hat = m2[i] / c2;
                slot.value[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_freezes_a_group() {
        let mut backbone = vec![1.0, 2.0];
        let mut head = vec![3.0];
        let mut g_backbone = vec![0.5, -0.5];
        let mut g_head = vec![0.25];
        let mut adam = Adam::new();
        let mut slots = [
            ParamSlot {
                group: ParamGroup::Backbone,
                value: &mut backbone,
                grad: &mut g_backbone,
            },
            ParamSlot {
                group: ParamGroup::Head,
                value: &mut head,
                grad: &mut g_head,
            },
        ];
        adam.step(&mut slots, |g| if g == ParamGroup::Head { 0.0 } else { 0.1 });
        assert_eq!(head, vec![3.0]);
        assert_ne!(backbone, vec![1.0, 2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction, |delta| on step 1 is ~lr regardless of g scale
        let mut p = vec![0.0];
        let mut g = vec![0.3];
        let mut adam = Adam::new();
        let mut slots = [ParamSlot {
            group: ParamGroup::Head,
            value: &mut p,
            grad: &mut g,
        }];
        adam.step(&mut slots, |_| 0.01);
        assert!((p[0] + 0.01).abs() < 1e-6, "got {}", p[0]);
    }
}
