//! Synthetic "fictitious person" profiles and their prompt renderings.
//!
//! Token layout of the prompt vocabulary:
//! `0` image placeholder, `1..=A` one question token per attribute, then one
//! name token per profile.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ModelInput, ModelTopology};
use crate::error::{ManuError, Result};
use crate::trace::Modality;

pub const IMAGE_TOKEN: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    /// Closed answer vocabulary; entries may contain several words.
    pub options: Vec<String>,
}

pub fn default_attributes() -> Vec<AttributeSpec> {
    let spec = |name: &str, options: &[&str]| AttributeSpec {
        name: name.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        spec(
            "birthyear",
            &[
                "born in 1961", "born in 1968", "born in 1973", "born in 1979",
                "born in 1984", "born in 1990", "born in 1995", "born in 2001",
            ],
        ),
        spec(
            "occupation",
            &[
                "software engineer", "marine biologist", "jazz pianist", "civil architect",
                "emergency physician", "high school teacher", "investigative journalist", "pastry chef",
            ],
        ),
        spec(
            "hometown",
            &[
                "grew up in lisbon", "grew up in osaka", "grew up in nairobi", "grew up in denver",
                "grew up in krakow", "grew up in lima", "grew up in perth", "grew up in quebec city",
            ],
        ),
        spec(
            "education",
            &[
                "studied physics", "studied law", "studied medicine", "studied fine art",
                "studied economics", "studied linguistics", "studied chemistry", "studied history",
            ],
        ),
    ]
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub seed: u64,
    pub count: usize,
    pub image_dim: usize,
    pub attributes: Vec<AttributeSpec>,
    /// Standard deviation of the Gaussian perturbation applied to test images.
    pub noise_level: f64,
    /// Percentage of profiles in the forget split: 5, 10 or 15.
    pub forget_fraction: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            count: 100,
            image_dim: 16,
            attributes: default_attributes(),
            noise_level: 0.3,
            forget_fraction: 10.0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ManuError::InvalidConfig(format!("dataset: {m}")));
        if self.count < 10 {
            return bad(format!("count must be at least 10, got {}", self.count));
        }
        if self.image_dim == 0 {
            return bad("image_dim must be positive".into());
        }
        if self.attributes.is_empty() {
            return bad("attribute schema is empty".into());
        }
        if let Some(a) = self.attributes.iter().find(|a| a.options.is_empty()) {
            return bad(format!("attribute {} has an empty answer vocabulary", a.name));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad(format!("noise_level must be non-negative, got {}", self.noise_level));
        }
        if ![5.0, 10.0, 15.0].contains(&self.forget_fraction) {
            return bad(format!("forget_fraction must be 5, 10 or 15, got {}", self.forget_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub id: String,
    pub name_token: usize,
    pub image: Vec<f64>,
    /// `image` plus the recorded test-time perturbation.
    pub test_image: Vec<f64>,
    /// Chosen option index per attribute.
    pub answers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Forget,
    Test,
    Retain,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Forget, Split::Test, Split::Retain];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Forget => "forget",
            Split::Test => "test",
            Split::Retain => "retain",
        }
    }
}

/// One rendered question with its gold answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub input: ModelInput,
    /// Global answer token.
    pub answer: usize,
    /// Answer tokens of the multiple-choice options for this question.
    pub options: std::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub spec: DatasetSpec,
    pub profiles: Vec<Profile>,
    /// Indices into `profiles`, ascending.
    pub forget: Vec<usize>,
    pub retain: Vec<usize>,
}

pub fn generate_profiles(spec: &DatasetSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let first_name = 1 + spec.attributes.len();
    let profiles: Vec<Profile> = (0..spec.count)
        .map(|i| {
            let image: Vec<f64> = (0..spec.image_dim).map(|_| rng.sample(StandardNormal)).collect();
            let test_image = image
                .iter()
                .map(|x| x + spec.noise_level * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let answers = spec
                .attributes
                .iter()
                .map(|a| rng.random_range(0..a.options.len()))
                .collect();
            Profile {
                id: format!("p-{i:03}"),
                name_token: first_name + i,
                image,
                test_image,
                answers,
            }
        })
        .collect();

    // the split only depends on (seed, fraction)
    let mut split_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..spec.count).collect();
    order.shuffle(&mut split_rng);
    let k = (spec.count as f64 * spec.forget_fraction / 100.0).round() as usize;
    let mut forget = order[..k].to_vec();
    let mut retain = order[k..].to_vec();
    forget.sort_unstable();
    retain.sort_unstable();

    Ok(SyntheticDataset {
        spec: spec.clone(),
        profiles,
        forget,
        retain,
    })
}

impl SyntheticDataset {
    pub fn token_vocab(&self) -> usize {
        1 + self.spec.attributes.len() + self.profiles.len()
    }

    pub fn answer_vocab(&self) -> usize {
        self.spec.attributes.iter().map(|a| a.options.len()).sum()
    }

    /// Global answer-token offset of each attribute's options.
    pub fn answer_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.spec
            .attributes
            .iter()
            .map(|a| {
                let o = off;
                off += a.options.len();
                o
            })
            .collect()
    }

    /// Text of a global answer token.
    pub fn answer_text(&self, token: usize) -> Option<&str> {
        let mut t = token;
        for a in &self.spec.attributes {
            if t < a.options.len() {
                return Some(&a.options[t]);
            }
            t -= a.options.len();
        }
        None
    }

    pub fn model_topology(&self, vision_widths: Vec<usize>, embed_dim: usize, language_widths: Vec<usize>) -> ModelTopology {
        ModelTopology {
            image_dim: self.spec.image_dim,
            vision_widths,
            token_vocab: self.token_vocab(),
            embed_dim,
            language_widths,
            answer_vocab: self.answer_vocab(),
        }
    }

    pub fn split_profiles(&self, split: Split) -> &[usize] {
        match split {
            Split::Forget | Split::Test => &self.forget,
            Split::Retain => &self.retain,
        }
    }

    /// Multimodal prompts show the image and a placeholder instead of the
    /// name; text-only prompts name the person and show a zero image.
    pub fn render(&self, profile: usize, attribute: usize, modality: Modality, split: Split) -> Sample {
        let p = &self.profiles[profile];
        let question = 1 + attribute;
        let input = match modality {
            Modality::Multimodal => ModelInput {
                image: if split == Split::Test { p.test_image.clone() } else { p.image.clone() },
                tokens: vec![IMAGE_TOKEN, question],
            },
            Modality::TextOnly => ModelInput {
                image: vec![0.0; self.spec.image_dim],
                tokens: vec![p.name_token, question],
            },
        };
        let off = self.answer_offsets()[attribute];
        let n = self.spec.attributes[attribute].options.len();
        Sample {
            id: format!("{}:{}", p.id, self.spec.attributes[attribute].name),
            input,
            answer: off + p.answers[attribute],
            options: off..off + n,
        }
    }

    /// Cloze prompt: the name is always given, the image only in the
    /// multimodal rendering.
    pub fn render_cloze(&self, profile: usize, attribute: usize, modality: Modality, split: Split) -> Sample {
        let mut s = self.render(profile, attribute, Modality::TextOnly, split);
        if modality == Modality::Multimodal {
            let p = &self.profiles[profile];
            s.input.image = if split == Split::Test { p.test_image.clone() } else { p.image.clone() };
        }
        s
    }

    pub fn samples(&self, split: Split, modality: Modality) -> Vec<Sample> {
        self.samples_for(self.split_profiles(split), modality, split)
    }

    pub fn samples_for(&self, profiles: &[usize], modality: Modality, split: Split) -> Vec<Sample> {
        profiles
            .iter()
            .flat_map(|&p| (0..self.spec.attributes.len()).map(move |a| (p, a)))
            .map(|(p, a)| self.render(p, a, modality, split))
            .collect()
    }

    pub fn cloze_samples(&self, split: Split, modality: Modality) -> Vec<Sample> {
        self.split_profiles(split)
            .iter()
            .flat_map(|&p| (0..self.spec.attributes.len()).map(move |a| (p, a)))
            .map(|(p, a)| self.render_cloze(p, a, modality, split))
            .collect()
    }

    /// Both renderings of every question about every profile.
    pub fn training_samples(&self) -> Vec<Sample> {
        let all: Vec<usize> = (0..self.profiles.len()).collect();
        Modality::ALL
            .iter()
            .flat_map(|&m| self.samples_for(&all, m, Split::Retain))
            .collect()
    }
}
