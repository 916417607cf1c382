//! Dense non-negative tables over a set of discrete variables.

use crate::network::Cpt;

/// Values are stored row-major over `scope` (last variable fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(scope.len(), cards.len());
        assert_eq!(values.len(), cards.iter().product::<usize>());
        Self { scope, cards, values }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), vec![value])
    }

    /// Factor over `parents ++ [child]`, matching the CPT row layout.
    pub fn from_cpt(cpt: &Cpt, cards: &[usize]) -> Self {
        let mut scope = cpt.parents().to_vec();
        scope.push(cpt.child());
        let fcards = scope.iter().map(|&v| cards[v]).collect();
        Self::new(scope, fcards, cpt.table().to_vec())
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.contains(&var)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Value at an assignment given in scope order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let mut idx = 0;
        for (&s, &c) in assignment.iter().zip(&self.cards) {
            idx = idx * c + s;
        }
        self.values[idx]
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![0; self.scope.len()];
        let mut acc = 1;
        for k in (0..self.scope.len()).rev() {
            strides[k] = acc;
            acc *= self.cards[k];
        }
        strides
    }

    /// Stride of each `scope` variable within this factor, 0 if absent.
    fn strides_for(&self, scope: &[usize]) -> Vec<usize> {
        let own = self.strides();
        scope
            .iter()
            .map(|v| self.scope.iter().position(|s| s == v).map_or(0, |k| own[k]))
            .collect()
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(&v) {
                scope.push(v);
                cards.push(c);
            }
        }
        let sa = self.strides_for(&scope);
        let sb = other.strides_for(&scope);
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut counter = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..total {
            values.push(self.values[ia] * other.values[ib]);
            for k in (0..scope.len()).rev() {
                counter[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if counter[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                counter[k] = 0;
            }
        }
        Factor::new(scope, cards, values)
    }

    /// Sum out every variable not in `keep`; the result follows `keep`'s order.
    pub fn marginalize_to(&self, keep: &[usize]) -> Factor {
        let keep: Vec<usize> = keep.iter().copied().filter(|v| self.scope.contains(v)).collect();
        let out_cards: Vec<usize> = keep
            .iter()
            .map(|v| self.cards[self.scope.iter().position(|s| s == v).unwrap()])
            .collect();
        let out = Factor::new(keep.clone(), out_cards.clone(), vec![0.0; out_cards.iter().product()]);
        // Stride of each of our scope variables in the output.
        let out_strides = out.strides_for(&self.scope);
        let mut values = out.values;
        let mut counter = vec![0usize; self.scope.len()];
        let mut io = 0usize;
        for &x in &self.values {
            values[io] += x;
            for k in (0..self.scope.len()).rev() {
                counter[k] += 1;
                io += out_strides[k];
                if counter[k] < self.cards[k] {
                    break;
                }
                io -= out_strides[k] * self.cards[k];
                counter[k] = 0;
            }
        }
        Factor::new(keep, out_cards, values)
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let keep: Vec<usize> = self.scope.iter().copied().filter(|&v| v != var).collect();
        self.marginalize_to(&keep)
    }

    /// Restrict `var` to `state` and drop it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        let outer: usize = self.cards[..pos].iter().product();
        let inner = strides[pos];
        let block = inner * self.cards[pos];
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = o * block + state * inner;
            values.extend_from_slice(&self.values[start..start + inner]);
        }
        Factor::new(scope, cards, values)
    }

    /// Reorder the scope; `order` must be a permutation of it.
    pub fn permute(&self, order: &[usize]) -> Factor {
        assert_eq!(order.len(), self.scope.len());
        if order == self.scope {
            return self.clone();
        }
        self.marginalize_to(order)
    }

    /// Scale to unit mass; `None` when the factor is identically zero.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn normalized(&self) -> Option<Factor> {
        let s = self.sum();
        if !(s > 0.0) {
            return None;
        }
        Some(Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|x| x / s).collect(),
        })
    }
}
