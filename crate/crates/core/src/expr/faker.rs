//! Bundled entity lexicons for fake names and items.

use crate::error::{Error, Result};
use crate::rng::RngStream;

const NAMES: &[&str] = &[
    "Alice", "Bob", "Carol", "David", "Emma", "Frank", "Grace", "Henry", "Irene", "Jack", "Karen",
    "Leo", "Maria", "Nathan", "Olivia", "Peter", "Quinn", "Rachel", "Samuel", "Tina", "Victor",
    "Wendy", "Xavier", "Yvonne", "Zack", "Amber", "Brian", "Chloe", "Dennis", "Elena", "Felix",
    "Gina", "Hugo", "Isla", "Jason", "Kylie", "Lucas", "Mona", "Noah", "Oscar", "Paula", "Ruby",
    "Simon", "Tessa", "Uma", "Vera", "Walter", "Yusuf", "Zoe", "Adrian", "Bella", "Caleb",
    "Daisy", "Ethan", "Fiona", "George", "Hannah", "Ivan", "Julia", "Kevin",
];

const FOODS: &[&str] = &[
    "hamburger", "fries", "cola", "salad", "ice cream", "pizza", "sandwich", "noodles", "dumplings",
    "sushi", "taco", "burrito", "pancake", "waffle", "donut", "muffin", "bagel", "soup", "curry",
    "steak", "omelette", "popcorn", "pretzel", "yogurt", "smoothie", "milkshake", "lemonade",
    "hot dog", "fried rice", "spring roll",
];

const PRODUCTS: &[&str] = &[
    "apples", "bread", "milk", "eggs", "cheese", "butter", "rice", "pasta", "coffee", "tea",
    "sugar", "flour", "honey", "jam", "cereal", "juice", "water", "soap", "shampoo", "toothpaste",
    "tissues", "batteries", "candles", "napkins", "sponges", "detergent", "oranges", "bananas",
    "carrots", "potatoes", "onions", "tomatoes", "chicken", "fish", "beef", "tofu", "crackers",
    "cookies", "chocolate", "peanuts",
];

const MAJORS: &[&str] = &[
    "Mathematics", "Physics", "Chemistry", "Biology", "History", "Geography", "Literature",
    "Economics", "Philosophy", "Music", "Art", "Computer Science", "Psychology", "Sociology",
    "Statistics", "Law", "Medicine", "Engineering", "Architecture", "Linguistics", "Astronomy",
    "Geology", "Political Science", "Accounting", "Finance", "Marketing", "Nursing", "Education",
    "Journalism", "Anthropology",
];

/// Lexicon for an entity kind.
pub fn lexicon(kind: &str) -> Result<&'static [&'static str]> {
    match kind {
        "name" => Ok(NAMES),
        "food" => Ok(FOODS),
        "product" => Ok(PRODUCTS),
        "major" => Ok(MAJORS),
        other => Err(Error::TypeMismatch(format!(
            "unknown entity kind `{other}` (expected name, food, product or major)"
        ))),
    }
}

/// `count` distinct entries of `kind`, drawn from `rng`.
pub fn draw(kind: &str, count: i64, rng: &mut RngStream) -> Result<Vec<String>> {
    let pool = lexicon(kind)?;
    if count < 0 {
        return Err(Error::TypeMismatch(format!("negative entity count {count}")));
    }
    let count = count as usize;
    if count > pool.len() {
        return Err(Error::ExhaustedPool {
            kind: kind.to_string(),
            available: pool.len(),
            requested: count,
        });
    }
    Ok(rng
        .sample_indices(pool.len(), count)
        .into_iter()
        .map(|i| pool[i].to_string())
        .collect())
}

/// `"A", "B", ...`
pub fn letters(count: i64) -> Result<Vec<String>> {
    if !(0..=26).contains(&count) {
        return Err(Error::ExhaustedPool {
            kind: "letters".into(),
            available: 26,
            requested: count.max(0) as usize,
        });
    }
    Ok((0..count as u8).map(|i| char::from(b'A' + i).to_string()).collect())
}
