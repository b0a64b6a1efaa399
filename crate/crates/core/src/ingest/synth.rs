use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::EmailRecord;
use crate::error::{Error, Result};

/// Fills empty bodies with texts drawn from `body_pool`.
///
/// Records are visited in order and one draw is made per empty-bodied record,
/// so the output depends only on `(records, body_pool, seed)`.
pub fn synthesize_corpus(
    records: &[EmailRecord],
    body_pool: &[String],
    seed: u64,
) -> Result<Vec<EmailRecord>> {
    if body_pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(records
        .iter()
        .map(|record| {
            let mut record = record.clone();
            if record.body.trim().is_empty() {
                record.body = body_pool[rng.random_range(0..body_pool.len())].clone();
                record.synthetic_body = true;
            }
            record
        })
        .collect())
}
