use actinf::distributions::Categorical;
use actinf::{GenerativeModel, History};
use rand::Rng;

/// Draws a history of length `t` the model can produce, by ancestral sampling
/// with uniformly random actions.
pub fn sample_history<R: Rng>(model: &GenerativeModel, t: usize, rng: &mut R) -> History {
    let draw = |p: &[f64], rng: &mut R| Categorical::new(p.to_vec()).unwrap().quantile(rng.gen());
    let mut s = draw(model.initial_belief().probs(), rng);
    let mut history = History::initial(draw(model.emission(s), rng));
    for _ in 0..t {
        let a = rng.gen_range(0..model.n_actions());
        s = draw(model.successors(a, s), rng);
        history.push(a, draw(model.emission(s), rng));
    }
    history
}
