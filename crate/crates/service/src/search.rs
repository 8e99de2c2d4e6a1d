use foodprompt::persistence::FoodListEntry;

pub const MAX_SEARCH_RESULTS: usize = 50;

/// Case-insensitive substring match over display names and codes, in file
/// order, capped at [`MAX_SEARCH_RESULTS`].
pub fn search_foods<'a>(foods: &'a [FoodListEntry], query: &str, limit: usize) -> Vec<&'a FoodListEntry> {
    let needle = query.trim().to_lowercase();
    if needle.is_empty() {
        return Vec::new();
    }
    foods
        .iter()
        .filter(|f| f.name.to_lowercase().contains(&needle) || f.code.as_str().to_lowercase().contains(&needle))
        .take(limit.min(MAX_SEARCH_RESULTS))
        .collect()
}
