//! From catalog text and image vectors to network inputs.

use crate::embeddings::{
    sentence_embedding, train_word2vec, EmbeddingMatrix, SentenceWeights, Vocabulary, Word2VecConfig, Word2VecModel,
};
use crate::error::{Error, Result};
use crate::market::ProductCatalogEntry;
use crate::net::FeatureTable;
use crate::scalar::Real;

/// One token sequence per catalog sentence (title, description, bullets).
pub fn catalog_corpus(catalog: &[ProductCatalogEntry], vocab: &Vocabulary) -> Vec<Vec<usize>> {
    catalog
        .iter()
        .flat_map(|e| e.sentences().into_iter().map(|s| vocab.encode(s)))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Builds the vocabulary over all catalog sentences and trains word vectors.
pub fn train_catalog_embeddings<T: Real>(
    catalog: &[ProductCatalogEntry],
    min_count: u64,
    config: &Word2VecConfig,
) -> Result<(Vocabulary, Word2VecModel<T>)> {
    let texts: Vec<&str> = catalog.iter().flat_map(|e| e.sentences()).collect();
    let vocab = Vocabulary::build(&texts, min_count)?;
    let corpus = catalog_corpus(catalog, &vocab);
    let model = train_word2vec(&corpus, &vocab, config)?;
    Ok((vocab, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextWeighting {
    #[default]
    Uniform,
    InverseFrequency,
}

/// `X_i = (W_i', I_i')'`: the averaged embedding of the product's full text,
/// followed by its image vector when `use_images` is set.
pub fn catalog_features<T: Real>(
    catalog: &[ProductCatalogEntry],
    vocab: &Vocabulary,
    omega: &EmbeddingMatrix<T>,
    weighting: TextWeighting,
    use_images: bool,
) -> Result<FeatureTable<T>> {
    let weights = match weighting {
        TextWeighting::Uniform => SentenceWeights::Uniform,
        TextWeighting::InverseFrequency => SentenceWeights::InverseFrequency(vocab.frequencies()),
    };
    let rows = catalog
        .iter()
        .map(|e| {
            let tokens = vocab.encode(&e.full_text());
            let mut x = sentence_embedding(omega, &tokens, weights)?.vector;
            if use_images {
                let img = e.image_features.as_ref().ok_or_else(|| {
                    Error::Validation(format!("product {} has no image features", e.product_id))
                })?;
                x.extend(img.iter().map(|&v| T::of(v)));
            }
            Ok((e.product_id.clone(), x))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::from_rows(rows)
}
