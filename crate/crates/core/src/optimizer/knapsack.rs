//! Multiple-choice knapsack (minimisation form): every class picks exactly
//! one item, total weight stays within a budget, total cost is minimal.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Item {
    pub cost: f64,
    pub weight: usize,
}

/// Dynamic program over total weight. Returns the minimum cost and the chosen
/// item index per class, or `None` if no selection fits in `budget`.
///
/// Table size is `classes × (budget + 1)`; ties keep the lower item index.
pub fn solve_dp(classes: &[Vec<Item>], budget: usize) -> Option<(f64, Vec<usize>)> {
    let width = budget + 1;
    // best[b]: min cost of the classes seen so far with total weight <= b
    let mut best = vec![0.0_f64; width];
    let mut next = vec![f64::INFINITY; width];
    let mut choice = vec![u16::MAX; classes.len() * width];

    for (c, items) in classes.iter().enumerate() {
        next.iter_mut().for_each(|v| *v = f64::INFINITY);
        let row = &mut choice[c * width..(c + 1) * width];
        for (i, item) in items.iter().enumerate() {
            if item.weight > budget {
                continue;
            }
            for b in item.weight..width {
                let cand = best[b - item.weight] + item.cost;
                if cand < next[b] {
                    next[b] = cand;
                    row[b] = i as u16;
                }
            }
        }
        std::mem::swap(&mut best, &mut next);
    }

    if !best[budget].is_finite() {
        return None;
    }
    let mut picks = vec![0; classes.len()];
    let mut b = budget;
    for c in (0..classes.len()).rev() {
        let i = choice[c * width + b] as usize;
        picks[c] = i;
        b -= classes[c][i].weight;
    }
    Some((best[budget], picks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealItem {
    pub cost: f64,
    pub weight: f64,
}

/// Exact branch and bound on real-valued weights. Used when the discretized
/// program keeps returning selections that fail the exact weight check.
pub fn solve_exact(classes: &[Vec<RealItem>], capacity: f64) -> Option<(f64, Vec<usize>)> {
    let k = classes.len();
    // suffix lower bounds on remaining cost and weight
    let mut min_cost = vec![0.0; k + 1];
    let mut min_weight = vec![0.0; k + 1];
    for c in (0..k).rev() {
        min_cost[c] = min_cost[c + 1]
            + classes[c]
                .iter()
                .map(|i| i.cost)
                .fold(f64::INFINITY, f64::min);
        min_weight[c] = min_weight[c + 1]
            + classes[c]
                .iter()
                .map(|i| i.weight)
                .fold(f64::INFINITY, f64::min);
    }
    // cheapest items first so good incumbents appear early
    let orders: Vec<Vec<usize>> = classes
        .iter()
        .map(|items| {
            let mut o: Vec<usize> = (0..items.len()).collect();
            o.sort_by(|&a, &b| items[a].cost.total_cmp(&items[b].cost).then(a.cmp(&b)));
            o
        })
        .collect();

    struct Search<'a> {
        classes: &'a [Vec<RealItem>],
        orders: &'a [Vec<usize>],
        min_cost: &'a [f64],
        min_weight: &'a [f64],
        capacity: f64,
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn go(&mut self, c: usize, cost: f64, weight: f64) {
            if c == self.classes.len() {
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    self.best = Some((cost, self.current.clone()));
                }
                return;
            }
            for &i in &self.orders[c] {
                let item = self.classes[c][i];
                let cost = cost + item.cost;
                let weight = weight + item.weight;
                if weight + self.min_weight[c + 1] > self.capacity {
                    continue;
                }
                if let Some((b, _)) = &self.best {
                    if cost + self.min_cost[c + 1] >= *b {
                        // items are cost-ordered: later ones are no cheaper
                        break;
                    }
                }
                self.current.push(i);
                self.go(c + 1, cost, weight);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        classes,
        orders: &orders,
        min_cost: &min_cost,
        min_weight: &min_weight,
        capacity,
        current: Vec::with_capacity(k),
        best: None,
    };
    search.go(0, 0.0, 0.0);
    search.best
}
