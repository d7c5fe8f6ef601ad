//! Spoken forms for digit runs.

const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];

const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

/// Largest value read as a cardinal; longer runs are read digit by digit.
pub const MAX_CARDINAL_DIGITS: usize = 4;

/// Reads a single ASCII digit.
pub fn digit_word(d: char) -> Option<&'static str> {
    d.to_digit(10).map(|v| ONES[v as usize])
}

/// "356" -> ["three", "five", "six"].
pub fn digits_to_words(run: &str) -> Vec<String> {
    run.chars()
        .filter_map(digit_word)
        .map(str::to_string)
        .collect()
}

/// Cardinal reading for 0..=9999, without "and".
pub fn cardinal_words(value: u32) -> Option<Vec<String>> {
    if value > 9999 {
        return None;
    }
    let mut out: Vec<&str> = Vec::new();
    if value == 0 {
        return Some(vec!["zero".to_string()]);
    }
    let thousands = value / 1000;
    let hundreds = (value / 100) % 10;
    let rest = value % 100;
    if thousands > 0 {
        out.push(ONES[thousands as usize]);
        out.push("thousand");
    }
    if hundreds > 0 {
        out.push(ONES[hundreds as usize]);
        out.push("hundred");
    }
    if rest > 0 {
        if rest < 20 {
            out.push(ONES[rest as usize]);
        } else {
            out.push(TENS[(rest / 10) as usize]);
            if !rest.is_multiple_of(10) {
                out.push(ONES[(rest % 10) as usize]);
            }
        }
    }
    Some(out.into_iter().map(str::to_string).collect())
}

/// Cardinal reading of a standalone digit run, if it qualifies.
///
/// Runs longer than [`MAX_CARDINAL_DIGITS`] and runs with a leading zero
/// ("007") only have a digit-by-digit reading.
pub fn cardinal_for_run(run: &str) -> Option<Vec<String>> {
    if run.is_empty() || run.len() > MAX_CARDINAL_DIGITS || !run.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    if run.len() > 1 && run.starts_with('0') {
        return None;
    }
    cardinal_words(run.parse().ok()?)
}
