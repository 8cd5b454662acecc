use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv, write_json};
use crate::error::Result;
use crate::features::{decile_code, feature_names, FeatureVector, Narrative};
use crate::scoring::{ModelArtifact, Toggle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthPoint {
    pub narrative: String,
    pub words: u32,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KarmaPoint {
    pub narrative: String,
    pub decile: u32,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub length: Vec<LengthPoint>,
    pub karma: Vec<KarmaPoint>,
}

impl Curves {
    pub fn length_at(&self, narrative: Narrative, words: u32) -> Option<f64> {
        self.length
            .iter()
            .find(|p| p.narrative == narrative.name() && p.words == words)
            .map(|p| p.probability)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        write_csv(&dir.join("curves_length.csv"), &self.length)?;
        write_csv(&dir.join("curves_karma.csv"), &self.karma)?;
        write_json(&dir.join("curves.json"), self)
    }
}

/// Reference request: median karma and community age, second half of the
/// month, no image, gratitude, reciprocity, prior posts, strong sentiment
/// or narrative.
fn reference_vector(art: &ModelArtifact) -> Result<FeatureVector> {
    let meta = &art.encoder;
    let mut x = FeatureVector {
        scheme: art.scheme,
        schema_id: art.schema_id.clone(),
        values: vec![0.0; feature_names(art.scheme).len()],
    };
    x.set(
        "community_age_decile",
        decile_code(meta.median("community_age_months")?, meta.cuts("community_age_months")?),
    )?;
    x.set("karma_decile", decile_code(meta.median("karma")?, meta.cuts("karma")?))?;
    for n in Narrative::ALL {
        Toggle::Narrative {
            narrative: n.name().into(),
            on: false,
        }
        .apply(&mut x, meta)?;
    }
    Ok(x)
}

/// Probability for each narrative alone against request length (0 to 300
/// words in steps of 5) and against karma decile (at median length).
pub fn run_interpretation_curves(art: &ModelArtifact) -> Result<Curves> {
    let base = reference_vector(art)?;
    let median_words = art.encoder.median("n_words")?;
    let mut length = Vec::new();
    let mut karma = Vec::new();
    for n in Narrative::ALL {
        let mut x = base.clone();
        Toggle::Narrative {
            narrative: n.name().into(),
            on: true,
        }
        .apply(&mut x, &art.encoder)?;
        for words in (0..=300).step_by(5) {
            x.set("length_100_words", f64::from(words) / 100.0)?;
            length.push(LengthPoint {
                narrative: n.name().into(),
                words,
                probability: art.predict_probability(&x)?,
            });
        }
        x.set("length_100_words", median_words / 100.0)?;
        for decile in 1..=10 {
            x.set("karma_decile", f64::from(decile))?;
            karma.push(KarmaPoint {
                narrative: n.name().into(),
                decile,
                probability: art.predict_probability(&x)?,
            });
        }
    }
    Ok(Curves { length, karma })
}
