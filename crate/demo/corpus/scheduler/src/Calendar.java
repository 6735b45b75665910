package scheduler;

public class Calendar {
    public boolean isLeap(int year) {
        boolean four = year % 4 == 0;
        boolean hundred = year % 100 == 0;
        boolean fourHundred = year % 400 == 0;
        return four && !hundred || fourHundred;
    }

    public int daysIn(int month, int year) {
        if (month == 2) {
            return isLeap(year) ? 29 : 28;
        }
        if (month == 4 || month == 6 || month == 9 || month == 11) {
            return 30;
        }
        return 31;
    }

    public int dayOfYear(int day, int month, int year) {
        int total = day;
        for (int m = 1; m < month; m++) {
            total = total + daysIn(m, year);
        }
        return total;
    }

    public int weeksBetween(int startDay, int endDay) {
        int span = endDay - startDay;
        return span / 7;
    }

    public boolean isWeekend(int dayIndex) {
        int d = dayIndex % 7;
        return d == 5 || d == 6;
    }
}
