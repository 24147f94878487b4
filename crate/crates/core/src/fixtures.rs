//! Three small worked examples, one per task, with known solution sets.

use crate::sqlgen::Table;
use crate::text::tokenize;
use crate::types::{Context, Example, TaskKind};

/// A biography mentioning the answer six times; only one mention answers the
/// question.
pub fn schumann() -> Example {
    let doc = "Robert Schumann was a German composer and influential music critic. He is widely regarded as one of \
        the greatest composers of the Romantic era. Robert Schumann himself refers to it as an affliction of the \
        whole hand. Robert Schumann is mentioned in a 1991 episode of Seinfeld The Jacket. Clara Schumann was a \
        German musician and composer, considered one of the most distinguished pianists of the Romantic era. Her \
        husband was the composer Robert Schumann. At the age of eight, the young Clara Wieck performed at the \
        Leipzig home of Dr. Ernst Carus. There she met another gifted young pianist who had been invited to the \
        musical evening, named Robert Schumann, who was nine years older. In the spring of 1853, the then unknown \
        20-year-old Brahms met Joachim in Hanover and got from him a letter of introduction to Robert Schumann.";
    Example {
        id: "fixture-span-schumann".to_owned(),
        question: tokenize("Which composer did pianist Clara Wieck marry in 1840?"),
        context: Context::Document(tokenize(doc)),
        answers: vec!["Robert Schumann".to_owned()],
        task: TaskKind::SpanExtraction,
    }
}

/// A game summary whose numbers are 10, 37, 9, 37, 36, 41, 40, 25, 8 and 6;
/// the answer 4 is reachable by many two-number equations.
pub fn field_goals() -> Example {
    let doc = "The Chiefs tied the game with QB Brodie Croyle completing a 10 yard td pass to WR Samie Parker. \
        Afterwards the Titans responded with Kicker Rob Bironas managing to get a 37 yard field goal. Kansas city \
        would take the lead prior to halftime with croyle completing a 9 yard td pass to FB Kris Wilson. In the \
        third quarter Tennessee would draw close as Bironas kicked a 37 yard field goal. The Chiefs answered with \
        kicker John Carney getting a 36 yard field goal. Afterwards the Titans would retake the lead with Young and \
        Williams hooking up with each other again on a 41 yard td pass. Tennessee clinched the victory with \
        Bironas nailing a 40 yard and a 25 yard field goal. With the win the Titans kept their playoff hopes alive \
        at 8 - 6.";
    Example {
        id: "fixture-arithmetic-field-goals".to_owned(),
        question: tokenize(
            "How many yards longer was Rob Bironas' longest field goal compared to John Carney's only field goal?",
        ),
        context: Context::Document(tokenize(doc)),
        answers: vec!["4".to_owned()],
        task: TaskKind::Arithmetic,
    }
}

/// A roster table where five queries return the answer: the intended one and
/// four min/max variants.
pub fn roster() -> Example {
    let headers = ["Player", "No.", "Nationality", "Position", "Year in Toronto", "School/Club Team"];
    let rows = [
        ["Acie Earl", "55", "United States", "Center", "1995-97", "Iowa"],
        ["John Long", "25", "United States", "Guard", "1996-97", "Detroit"],
        ["Vince Carter", "15", "United States", "Guard", "1998-2004", "North Carolina"],
        ["Walt Williams", "42", "United States", "Forward", "1996-97", "Maryland"],
        ["Oliver Miller", "25", "United States", "Center", "1995-96", "Arkansas"],
    ];
    let table = Table::new(
        headers.iter().map(|s| s.to_string()).collect(),
        rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
    )
    .expect("fixture table is rectangular");
    Example {
        id: "fixture-sql-roster".to_owned(),
        question: tokenize("What player played guard for Toronto in 1996-97?"),
        context: Context::Table(table),
        answers: vec!["John Long".to_owned()],
        task: TaskKind::SqlGeneration,
    }
}
