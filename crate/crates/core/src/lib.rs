pub mod preference;
pub mod matching;
pub mod ranking;
pub mod seeding;
pub mod model;
pub mod rounds;
pub mod scenario;
pub mod report;
pub mod sim;
