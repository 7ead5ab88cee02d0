//! Deterministic synthetic recipe corpus.
//!
//! Recipes are templated over a small fixed inventory of cuisines, dishes,
//! ingredients and cooking verbs, so a tiny language model can learn them.
//! Image features are noisy prototypes of the dish (cuisine, main ingredient,
//! dish kind), which gives the visual mapping layer something real to align.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Partition, Recipe, RecipeSet};

struct Cuisine {
    name: &'static str,
    mains: &'static [&'static str],
    kinds: &'static [(&'static str, &'static str)],
    extras: &'static [(&'static str, &'static str)],
}

const CUISINES: [Cuisine; 3] = [
    Cuisine {
        name: "Italian",
        mains: &["chicken", "tomato", "mushroom", "spinach", "shrimp"],
        kinds: &[("pasta", "pot"), ("risotto", "pan"), ("soup", "pot"), ("bake", "dish")],
        extras: &[
            ("garlic", "2 cloves"),
            ("basil", "1 bunch"),
            ("olive oil", "2 tablespoons"),
            ("parmesan", "1 cup"),
            ("onion", "1 large"),
            ("oregano", "1 teaspoon"),
            ("cream", "1 cup"),
        ],
    },
    Cuisine {
        name: "Thai",
        mains: &["chicken", "tofu", "shrimp", "beef", "pork"],
        kinds: &[("curry", "pot"), ("noodles", "wok"), ("stir fry", "wok"), ("soup", "pot")],
        extras: &[
            ("coconut milk", "1 can"),
            ("lemongrass", "2 stalks"),
            ("ginger", "1 tablespoon"),
            ("chili", "2 small"),
            ("lime", "1 whole"),
            ("fish sauce", "2 tablespoons"),
            ("basil", "1 bunch"),
        ],
    },
    Cuisine {
        name: "Mexican",
        mains: &["beef", "chicken", "bean", "pork", "corn"],
        kinds: &[("tacos", "pan"), ("burritos", "pan"), ("stew", "pot"), ("salad", "bowl")],
        extras: &[
            ("onion", "1 large"),
            ("cumin", "1 teaspoon"),
            ("chili", "2 small"),
            ("lime", "1 whole"),
            ("cilantro", "1 bunch"),
            ("tomato", "2 medium"),
            ("cheese", "1 cup"),
        ],
    },
];

const ADJECTIVES: [&str; 5] = ["classic", "easy", "spicy", "creamy", "rustic"];
const PREP_VERBS: [&str; 4] = ["chop", "slice", "dice", "rinse"];
const COOK_VERBS: [&str; 4] = ["cook", "simmer", "saute", "roast"];
const FINISHES: [&str; 3] = ["hot", "warm", "immediately"];
const MINUTES: [u32; 4] = [5, 10, 15, 20];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub d_vis: usize,
    pub seed: u64,
    /// Probability that a recipe carries image features.
    pub image_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 600,
            d_vis: 16,
            seed: 7,
            image_rate: 0.7,
        }
    }
}

/// Partition by index: 8 of every 10 recipes train, then one val, one test.
pub fn partition_for(index: usize) -> Partition {
    match index % 10 {
        8 => Partition::Val,
        9 => Partition::Test,
        _ => Partition::Train,
    }
}

pub fn generate(config: &SynthConfig) -> RecipeSet {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let recipes = (0..config.count).map(|i| generate_one(i, config, &mut rng)).collect();
    RecipeSet::new(recipes, config.d_vis.max(1)).expect("synthetic recipes satisfy the invariants")
}

fn capitalize(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn generate_one(index: usize, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Recipe {
    let ci = rng.gen_range(0..CUISINES.len());
    let cuisine = &CUISINES[ci];
    let mi = rng.gen_range(0..cuisine.mains.len());
    let main = cuisine.mains[mi];
    let ki = rng.gen_range(0..cuisine.kinds.len());
    let (kind, vessel) = cuisine.kinds[ki];
    let adjective = ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())];

    let extra_count = rng.gen_range(3..=4);
    let extras: Vec<(&str, &str)> = cuisine.extras.choose_multiple(rng, extra_count).copied().collect();

    let title = capitalize(&format!("{adjective} {main} {kind}"));
    let mut ingredients = vec![format!("{} pound {main}", rng.gen_range(1..=2))];
    ingredients.extend(extras.iter().map(|(name, amount)| format!("{amount} {name}")));

    let prep = PREP_VERBS[rng.gen_range(0..PREP_VERBS.len())];
    let cook = COOK_VERBS[rng.gen_range(0..COOK_VERBS.len())];
    let minutes = MINUTES[rng.gen_range(0..MINUTES.len())];
    let finish = FINISHES[rng.gen_range(0..FINISHES.len())];
    let mut instructions = vec![
        capitalize_first(&format!("{prep} the {main} and the {}.", extras[0].0)),
        capitalize_first(&format!("{cook} in a {vessel} with the {} for {minutes} minutes.", extras[1].0)),
        capitalize_first(&format!("add the {} and serve the {kind} {finish}.", extras[2].0)),
    ];
    if let Some((last, _)) = extras.get(3) {
        instructions.push(capitalize_first(&format!("garnish with {last}.")));
    }

    let image_features = if rng.gen_bool(config.image_rate.clamp(0.0, 1.0)) {
        let count = rng.gen_range(1..=2);
        Some((0..count).map(|_| visual_prototype(ci, mi, ki, config.d_vis, rng)).collect())
    } else {
        None
    };

    Recipe {
        id: format!("syn{index:06}"),
        title,
        ingredients,
        instructions,
        image_features,
        cuisine: Some(cuisine.name.to_owned()),
        partition: partition_for(index),
    }
}

fn capitalize_first(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

// One-hot blocks for cuisine, main and kind (wrapped into d_vis) plus noise.
fn visual_prototype(cuisine: usize, main: usize, kind: usize, d_vis: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = d_vis.max(1);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.1..0.1)).collect();
    v[cuisine % d] += 1.0;
    v[(3 + main) % d] += 1.0;
    v[(8 + kind) % d] += 1.0;
    v
}
